import { describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import { ANGLE_ORDER, SessionDoc } from "../src/types.js";
import { badgeFor, bannerFromError, projectSession } from "../src/view.js";
import { renderCardHtml } from "../src/workspace.js";

function doc(overrides: Partial<SessionDoc> = {}): SessionDoc {
  return {
    id: "s1",
    mode: "chatcoder",
    state: "Round1Proposed",
    spec: {
      free_text: null,
      sections: ANGLE_ORDER.map((angle) => ({
        angle,
        status: "proposed",
        spans: [{ text: `about ${angle}`, origin: "machine" as const }],
      })),
      qa_items: [],
    },
    transcript: [],
    final_requirement: null,
    loopback_count: 0,
    loopback_budget: 1,
    task: { task_id: "fx/0", requirement_text: "def add(a, b):" },
    ...overrides,
  };
}

describe("projectSession", () => {
  it("renders six cards in fixed angle order", () => {
    const view = projectSession(doc());
    expect(view.cards.map((c) => c.angle)).toEqual([...ANGLE_ORDER]);
    expect(view.cards[0]!.title).toBe("Key Concepts");
    expect(view.cards[5]!.title).toBe("Exceptions and Errors");
  });

  it("orders cards canonically even if the server lists them shuffled", () => {
    const base = doc();
    const shuffled = { ...base, spec: { ...base.spec, sections: [...base.spec.sections].reverse() } };
    expect(projectSession(shuffled).cards.map((c) => c.angle)).toEqual([...ANGLE_ORDER]);
  });

  it("marks human spans and merges adjacent same-origin runs", () => {
    const base = doc();
    base.spec.sections[2] = {
      angle: "input_requirements",
      status: "reviewed",
      spans: [
        { text: "two", origin: "machine" },
        { text: " ", origin: "machine" },
        { text: "integers", origin: "human" },
        { text: " only", origin: "human" },
      ],
    };
    const view = projectSession(base);
    const card = view.cards.find((c) => c.angle === "input_requirements")!;
    expect(card.segments).toEqual([
      { text: "two ", human: false },
      { text: "integers only", human: true },
    ]);
    expect(card.humanTokens).toBe(true);
    expect(card.text).toBe("two integers only");
  });

  it("flags deleted sections", () => {
    const base = doc();
    base.spec.sections[5] = { angle: "exceptions_errors", status: "deleted", spans: [] };
    const view = projectSession(base);
    expect(view.cards[5]!.deleted).toBe(true);
    expect(view.cards[5]!.text).toBe("");
  });

  it("exposes QA items with stable indices and open flags", () => {
    const base = doc({ state: "Round2Questioned" });
    base.spec.qa_items = [
      { question: "Q1?", proposed_answer: "A1", final_answer: null, status: "open" },
      { question: "Q2?", proposed_answer: "A2", final_answer: "A2", status: "accepted" },
    ];
    const view = projectSession(base);
    expect(view.qaItems.map((q) => [q.index, q.open])).toEqual([
      [0, true],
      [1, false],
    ]);
  });
});

describe("gating", () => {
  const cases: [string, string, Partial<Record<string, boolean>>][] = [
    ["chatcoder", "Initialized", { canParaphrase: true, canFinalize: false }],
    ["chatcoder", "Round1Proposed", { canReview: true, canQuestions: false }],
    ["chatcoder", "Round1Reviewed", { canReview: true, canQuestions: true }],
    ["chatcoder", "Round2Questioned", { canAnswer: true, canFinalize: false }],
    ["chatcoder", "Round2Resolved", { canFinalize: true, canGenerate: false }],
    ["chatcoder", "Finalized", { canGenerate: true, canFinalize: false }],
    ["free-qa", "Initialized", { canParaphrase: false, canQuestions: true }],
    ["free-paraphrase", "Round1Reviewed", { canFinalize: true, canQuestions: false }],
    ["auto-refine", "Round2Questioned", { canAnswer: false }],
  ];
  for (const [mode, state, expected] of cases) {
    it(`${mode}/${state}`, () => {
      const gating = projectSession(doc({ mode, state })).gating as unknown as Record<
        string,
        boolean
      >;
      for (const [key, value] of Object.entries(expected)) {
        expect(gating[key], `${key} in ${mode}/${state}`).toBe(value);
      }
    });
  }

  it("disables loop-back once the budget is spent", () => {
    const spent = doc({ state: "Round2Questioned", loopback_count: 1, loopback_budget: 1 });
    expect(projectSession(spent).gating.canFlagLoopback).toBe(false);
    const fresh = doc({ state: "Round2Questioned" });
    expect(projectSession(fresh).gating.canFlagLoopback).toBe(true);
  });
});

describe("badges and banners", () => {
  it("maps outcomes to badge tones", () => {
    expect(badgeFor({ outcome: "pass" }).tone).toBe("ok");
    expect(badgeFor({ outcome: "fail" }).tone).toBe("bad");
    expect(badgeFor({ outcome: "crash" }).tone).toBe("bad");
    expect(badgeFor({ outcome: "timeout" }).tone).toBe("warn");
    expect(badgeFor({ outcome: "extraction_failure" }).label).toBe("extraction failure");
  });

  it("turns a 409 into a non-blocking conflict banner with a next-step hint", () => {
    const banner = bannerFromError(
      new ApiError(409, "InvalidState", "cannot finalize", "Round2Questioned"),
    );
    expect(banner.kind).toBe("conflict");
    expect(banner.blocking).toBe(false);
    expect(banner.code).toBe("InvalidState");
    expect(banner.hint).toContain("answer the open questions");
  });

  it("wraps unknown errors without throwing", () => {
    const banner = bannerFromError(new Error("boom"));
    expect(banner.kind).toBe("error");
    expect(banner.message).toContain("boom");
  });
});

describe("renderCardHtml", () => {
  it("wraps human runs in <mark> and escapes markup", () => {
    const html = renderCardHtml({
      angle: "edge_cases",
      title: "Edge Cases",
      text: "a <b> c",
      segments: [
        { text: "a <b> ", human: false },
        { text: "c", human: true },
      ],
      deleted: false,
      humanTokens: true,
    });
    expect(html).toContain("a &lt;b&gt; ");
    expect(html).toContain('<mark class="human">c</mark>');
    expect(html).toContain('data-angle="edge_cases"');
  });
});
