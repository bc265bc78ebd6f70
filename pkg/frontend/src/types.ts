import { z } from "zod";

export const ReviewItem = z.object({
  sample_id: z.string(),
  instruction: z.string(),
  original_uri: z.string(),
  edited_uri: z.string(),
});
export type ReviewItem = z.infer<typeof ReviewItem>;

export const LabeledItem = ReviewItem.extend({
  verdict: z.enum(["keep", "discard"]).nullable(),
});
export type LabeledItem = z.infer<typeof LabeledItem>;

export const Verdict = z.enum(["keep", "discard"]);
export type Verdict = z.infer<typeof Verdict>;

export const ConfusionCounts = z.object({
  good_keep: z.number().int(),
  good_discard: z.number().int(),
  bad_keep: z.number().int(),
  bad_discard: z.number().int(),
});
export type ConfusionCounts = z.infer<typeof ConfusionCounts>;

export const CalibrationReport = z.object({
  threshold: z.number(),
  counts: ConfusionCounts,
  total: z.number().int(),
  proportions: z.record(z.string(), z.number()),
  accuracy: z.number(),
});
export type CalibrationReport = z.infer<typeof CalibrationReport>;

export interface LabelSubmission {
  sample_id: string;
  verdict: Verdict;
  annotator_id: string;
}
