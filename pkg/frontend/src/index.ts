export * from "./types.js";
export * from "./api.js";
export * from "./view.js";
export * from "./poll.js";
export * from "./workspace.js";
