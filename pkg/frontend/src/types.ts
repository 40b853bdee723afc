import { z } from "zod";

/** Fixed angle order; cards always render in this sequence. */
export const ANGLE_ORDER = [
  "key_concepts",
  "method_purpose",
  "input_requirements",
  "output_requirements",
  "edge_cases",
  "exceptions_errors",
] as const;

export type AngleId = (typeof ANGLE_ORDER)[number];

export const ANGLE_TITLES: Record<AngleId, string> = {
  key_concepts: "Key Concepts",
  method_purpose: "Method Purpose",
  input_requirements: "Input Requirements",
  output_requirements: "Output Requirements",
  edge_cases: "Edge Cases",
  exceptions_errors: "Exceptions and Errors",
};

export const SpanSchema = z.object({
  text: z.string(),
  origin: z.enum(["machine", "human"]),
});

export const SectionSchema = z.object({
  angle: z.string(),
  status: z.string(),
  spans: z.array(SpanSchema),
});

export const QAItemSchema = z.object({
  question: z.string(),
  proposed_answer: z.string().nullable().optional(),
  final_answer: z.string().nullable().optional(),
  status: z.string(),
});

export const SpecSchema = z.object({
  free_text: z.string().nullable().optional(),
  sections: z.array(SectionSchema),
  qa_items: z.array(QAItemSchema),
});

export const CandidateSchema = z.object({
  code: z.string().nullable().optional(),
  outcome: z.string(),
  detail: z.string().nullable().optional(),
});

export const TranscriptEntrySchema = z
  .object({ role: z.string(), content: z.string() })
  .passthrough();

export const SessionDocSchema = z
  .object({
    id: z.string(),
    mode: z.string(),
    state: z.string(),
    spec: SpecSchema,
    transcript: z.array(TranscriptEntrySchema),
    final_requirement: z.string().nullable().optional(),
    loopback_count: z.number(),
    loopback_budget: z.number(),
    candidates: z.array(CandidateSchema).optional(),
    task: z.object({ task_id: z.string(), requirement_text: z.string() }).passthrough(),
  })
  .passthrough();

export const JobDocSchema = z
  .object({
    job_id: z.string(),
    status: z.enum(["pending", "running", "done", "failed"]),
    error_detail: z.string().nullable().optional(),
    result_ref: z.string().nullable().optional(),
  })
  .passthrough();

export const TaskSummarySchema = z
  .object({ task_id: z.string(), dataset: z.string() })
  .passthrough();

export const ErrorBodySchema = z
  .object({
    code: z.string(),
    message: z.string(),
    state: z.string().nullable().optional(),
  })
  .passthrough();

export type SessionDoc = z.infer<typeof SessionDocSchema>;
export type JobDoc = z.infer<typeof JobDocSchema>;
export type QAItem = z.infer<typeof QAItemSchema>;
export type Candidate = z.infer<typeof CandidateSchema>;
export type ErrorBody = z.infer<typeof ErrorBodySchema>;

export type AnswerAction = "accept" | "answer" | "flag_loopback";

export interface AnswerInput {
  index: number;
  action: AnswerAction;
  text?: string;
}
