import { z } from "zod";
import { indicatorType, labelValue } from "./api";

const goldIndicator = z.object({
  value: z.string(),
  type: indicatorType,
  label: labelValue,
  provenance: z.enum(["Consensus", "Senior"]),
  justifications: z.array(z.string()),
  occurrences: z.array(z.tuple([z.number().int().nonnegative(), z.number().int().nonnegative()])),
});

const goldReport = z.object({
  report_id: z.string(),
  source_name: z.string(),
  sha256_of_text: z.string().regex(/^[0-9a-f]{64}$/),
  indicators: z.array(goldIndicator),
});

export const goldDatasetSchema = z.object({
  version: z.literal("1"),
  reports: z.array(goldReport),
});

export type GoldDataset = z.infer<typeof goldDatasetSchema>;

export function parseGoldDataset(text: string): GoldDataset {
  return goldDatasetSchema.parse(JSON.parse(text));
}

type Json = null | boolean | number | string | Json[] | { [key: string]: Json };

function sortKeysDeep(value: Json): Json {
  if (Array.isArray(value)) return value.map(sortKeysDeep);
  if (value !== null && typeof value === "object") {
    const sorted: { [key: string]: Json } = {};
    for (const key of Object.keys(value).sort()) {
      sorted[key] = sortKeysDeep(value[key]!);
    }
    return sorted;
  }
  return value;
}

/**
 * Render a dataset in the service's canonical form: keys sorted, two-space
 * indent, ASCII-escaped, trailing newline. parse + serialize of a served
 * export reproduces its bytes exactly.
 */
export function serializeGoldDataset(doc: GoldDataset): string {
  const text = JSON.stringify(sortKeysDeep(doc as Json), null, 2) + "\n";
  return text.replace(
    /[-￿]/g,
    (ch) => "\\u" + ch.charCodeAt(0).toString(16).padStart(4, "0"),
  );
}

export interface DatasetSummary {
  reports: number;
  indicators: number;
  iocs: number;
}

export function datasetSummary(doc: GoldDataset): DatasetSummary {
  const indicators = doc.reports.flatMap((report) => report.indicators);
  return {
    reports: doc.reports.length,
    indicators: indicators.length,
    iocs: indicators.filter((ind) => ind.label === "IoC").length,
  };
}
