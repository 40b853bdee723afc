import {
  ANGLE_ORDER,
  ANGLE_TITLES,
  AngleId,
  Candidate,
  SessionDoc,
} from "./types.js";
import { ApiError } from "./api.js";

/** One rendered text run inside a card; `human` runs get the highlight style. */
export interface TextSegment {
  text: string;
  human: boolean;
}

export interface AngleCard {
  angle: AngleId;
  title: string;
  /** Whole editable text of the section (edits are full replacements). */
  text: string;
  segments: TextSegment[];
  deleted: boolean;
  humanTokens: boolean;
}

export interface QAView {
  index: number;
  question: string;
  proposedAnswer: string | null;
  finalAnswer: string | null;
  status: string;
  open: boolean;
}

export interface VerdictBadge {
  outcome: string;
  label: string;
  tone: "ok" | "bad" | "warn";
}

export interface Gating {
  canParaphrase: boolean;
  canReview: boolean;
  canQuestions: boolean;
  canAnswer: boolean;
  canFinalize: boolean;
  canGenerate: boolean;
  canFlagLoopback: boolean;
}

/** Pure projection of the last fetched server document; no client-side protocol state. */
export interface SessionView {
  sessionId: string;
  taskId: string;
  requirement: string;
  mode: string;
  state: string;
  cards: AngleCard[];
  freeText: string | null;
  qaItems: QAView[];
  finalRequirement: string | null;
  candidates: { badge: VerdictBadge; code: string | null }[];
  gating: Gating;
}

function mergeRuns(segments: TextSegment[]): TextSegment[] {
  const out: TextSegment[] = [];
  for (const segment of segments) {
    const last = out[out.length - 1];
    if (last && last.human === segment.human) {
      last.text += segment.text;
    } else {
      out.push({ ...segment });
    }
  }
  return out;
}

export function badgeFor(candidate: Candidate): VerdictBadge {
  const outcome = candidate.outcome;
  const tone: VerdictBadge["tone"] =
    outcome === "pass" ? "ok" : outcome === "fail" || outcome === "crash" ? "bad" : "warn";
  return { outcome, label: outcome.replace(/_/g, " "), tone };
}

function gatingFor(doc: SessionDoc): Gating {
  const state = doc.state;
  const mode = doc.mode;
  const finalizeState = mode === "free-paraphrase" ? "Round1Reviewed" : "Round2Resolved";
  const questionStates =
    mode === "free-qa" ? ["Initialized"] : ["Round1Reviewed"];
  return {
    canParaphrase: state === "Initialized" && mode !== "free-qa",
    canReview:
      mode === "chatcoder" && (state === "Round1Proposed" || state === "Round1Reviewed"),
    canQuestions: mode !== "free-paraphrase" && questionStates.includes(state),
    canAnswer:
      state === "Round2Questioned" && mode !== "auto-refine",
    canFinalize: state === finalizeState,
    canGenerate: state === "Finalized",
    canFlagLoopback:
      state === "Round2Questioned" &&
      mode === "chatcoder" &&
      doc.loopback_count < doc.loopback_budget,
  };
}

export function projectSession(doc: SessionDoc): SessionView {
  const byAngle = new Map(doc.spec.sections.map((s) => [s.angle, s]));
  const cards: AngleCard[] = [];
  for (const angle of ANGLE_ORDER) {
    const section = byAngle.get(angle);
    if (!section) continue;
    const segments = mergeRuns(
      section.spans.map((span) => ({ text: span.text, human: span.origin === "human" })),
    );
    cards.push({
      angle,
      title: ANGLE_TITLES[angle],
      text: segments.map((s) => s.text).join(""),
      segments,
      deleted: section.status === "deleted",
      humanTokens: segments.some((s) => s.human && s.text.trim().length > 0),
    });
  }
  const qaItems: QAView[] = doc.spec.qa_items.map((item, index) => ({
    index,
    question: item.question,
    proposedAnswer: item.proposed_answer ?? null,
    finalAnswer: item.final_answer ?? null,
    status: item.status,
    open: item.status === "open",
  }));
  return {
    sessionId: doc.id,
    taskId: doc.task.task_id,
    requirement: doc.task.requirement_text,
    mode: doc.mode,
    state: doc.state,
    cards,
    freeText: doc.spec.free_text ?? null,
    qaItems,
    finalRequirement: doc.final_requirement ?? null,
    candidates: (doc.candidates ?? []).map((candidate) => ({
      badge: badgeFor(candidate),
      code: candidate.code ?? null,
    })),
    gating: gatingFor(doc),
  };
}

export interface Banner {
  kind: "error" | "conflict";
  code: string;
  message: string;
  /** Server-reported state, used to hint at the legal next step. */
  hint: string | null;
  blocking: false;
}

const NEXT_STEP_HINTS: Record<string, string> = {
  Initialized: "run the paraphrase round first",
  Round1Proposed: "review the proposed sections first",
  Round1Reviewed: "run the questioning round first",
  Round2Questioned: "answer the open questions first",
  Round2Resolved: "finalize the requirement first",
  Finalized: "the session is already finalized",
};

/** 409s become a non-blocking banner; the view itself is left untouched. */
export function bannerFromError(error: unknown): Banner {
  if (error instanceof ApiError) {
    const hint = error.state ? NEXT_STEP_HINTS[error.state] ?? null : null;
    return {
      kind: error.status === 409 ? "conflict" : "error",
      code: error.code,
      message: error.message,
      hint,
      blocking: false,
    };
  }
  return {
    kind: "error",
    code: "Unknown",
    message: String(error),
    hint: null,
    blocking: false,
  };
}
