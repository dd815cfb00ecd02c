/**
 * Client-side mirror of the audit-service JSON schemas (schema_version 1).
 *
 * Every request body the UI sends is parsed against these schemas before
 * it leaves the client, so a structurally invalid request can never be
 * constructed; the recorded-fixture contract tests keep this mirror in
 * sync with the server.
 */
import { z } from "zod";

export const SCHEMA_VERSION = 1;

export const ERROR_KINDS = [
  "multiple_occurrences",
  "no_occurrence",
  "duplicate_query",
  "unclear_query",
  "inaccurate_segment",
  "info_leakage",
] as const;

export const ErrorKindSchema = z.enum(ERROR_KINDS);
export type ErrorKind = z.infer<typeof ErrorKindSchema>;

export const PhaseSchema = z.enum(["review", "validate"]);
export type Phase = z.infer<typeof PhaseSchema>;

export const TASK_STATES = [
  "pending",
  "in_review",
  "reviewed",
  "in_validation",
  "validated",
  "rejected",
] as const;

export const CorrectionSchema = z.object({
  new_query: z.string().nullable().optional(),
  new_span: z.tuple([z.number(), z.number()]).nullable().optional(),
  discarded: z.boolean().optional(),
});
export type Correction = z.infer<typeof CorrectionSchema>;

// ---- request bodies --------------------------------------------------------

export const CreateBatchRequestSchema = z.object({
  annotation_ids: z.array(z.string()).min(1),
  qc_threshold: z.number().min(0).max(1),
});
export type CreateBatchRequest = z.infer<typeof CreateBatchRequestSchema>;

export const AssignRequestSchema = z.object({ phase: PhaseSchema });
export type AssignRequest = z.infer<typeof AssignRequestSchema>;

export const ReviewRequestSchema = z.object({
  diagnosis: z.union([z.literal("no_error"), z.array(ErrorKindSchema).min(1)]),
  correction: CorrectionSchema.nullable().optional(),
});
export type ReviewRequest = z.infer<typeof ReviewRequestSchema>;

export const ValidateRequestSchema = z.object({
  verdict: z.enum(["correct", "incorrect"]),
  reason: z.string().nullable().optional(),
});
export type ValidateRequest = z.infer<typeof ValidateRequestSchema>;

// ---- response bodies -------------------------------------------------------

export const TaskSchema = z.object({
  task_id: z.string(),
  annotation_id: z.string(),
  batch_id: z.string(),
  state: z.enum(TASK_STATES),
  reviewer_id: z.string().nullable(),
  validator_id: z.string().nullable(),
  diagnosis: z.array(z.string()).nullable(),
  correction: CorrectionSchema.nullable(),
  verdict: z.string().nullable(),
  verdict_reason: z.string().nullable(),
  video_group: z.array(z.string()),
});
export type Task = z.infer<typeof TaskSchema>;

export const BatchSchema = z.object({
  batch_id: z.string(),
  task_ids: z.array(z.string()),
  qc_threshold: z.number(),
  status: z.enum(["open", "validating", "accepted", "rejected"]),
});
export type Batch = z.infer<typeof BatchSchema>;

const versioned = <T extends z.ZodRawShape>(shape: T) =>
  z.object({ schema_version: z.literal(SCHEMA_VERSION), ...shape });

export const HealthResponseSchema = versioned({
  status: z.string(),
  dataset: z.string(),
});

export const CreateBatchResponseSchema = versioned({ batch: BatchSchema });
export const AssignResponseSchema = versioned({ task: TaskSchema.nullable() });
export const TaskResponseSchema = versioned({ task: TaskSchema });
export const QcResponseSchema = versioned({
  batch_id: z.string(),
  status: z.enum(["accepted", "rejected"]),
  error_rate: z.number(),
});
export const ExportResponseSchema = versioned({
  records: z.array(z.record(z.string(), z.unknown())),
  ledger: z.object({
    dataset: z.string(),
    n_exported: z.number().int(),
    n_discarded: z.number().int(),
    rewritten_queries: z.number().int(),
    refined_time_segments: z.number().int(),
  }),
});

export const ErrorResponseSchema = z.object({ detail: z.unknown() });
