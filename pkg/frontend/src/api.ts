import { z } from "zod";

export const labelValue = z.enum(["IoC", "nonIoC"]);
export const indicatorType = z.enum([
  "ip4",
  "domain",
  "url",
  "hash-md5",
  "hash-sha1",
  "hash-sha256",
]);

export type LabelValue = z.infer<typeof labelValue>;
export type IndicatorType = z.infer<typeof indicatorType>;

const byteSpan = z.tuple([z.number().int(), z.number().int()]);

const machineBlock = z.object({
  label: labelValue,
  justifications: z.array(z.string()),
});

const analystLabel = z.object({
  label: labelValue,
  comments: z.array(z.string()),
});

export const indicatorPayload = z.object({
  value: z.string(),
  type: indicatorType,
  occurrences: z.array(byteSpan),
  // present only when the server decides this analyst may see them
  machine: machineBlock.optional(),
  junior_labels: z.record(z.string(), labelValue).optional(),
  my_label: analystLabel.nullable(),
});

export const reportPayload = z.object({
  report_id: z.string(),
  source_name: z.string(),
  text: z.string(),
  mode: z.enum(["blind", "guided"]),
  state: z.enum(["Open", "AwaitingSenior", "Finalized"]),
  indicators: z.array(indicatorPayload),
});

export const reportListing = z.object({
  session_id: z.string(),
  mode: z.enum(["blind", "guided"]),
  state: z.enum(["Open", "AwaitingSenior", "Finalized"]),
  analyst_id: z.string(),
  reports: z.array(
    z.object({
      report_id: z.string(),
      source_name: z.string(),
      indicator_count: z.number().int(),
      labeled_count: z.number().int(),
      disputed: z.boolean(),
    }),
  ),
});

const labelEcho = z.object({
  report_id: z.string(),
  type: z.string(),
  value: z.string(),
  label: z.string(),
  analyst_id: z.string(),
});

const disputesBody = z.object({
  state: z.enum(["Open", "AwaitingSenior", "Finalized"]),
  disputes: z.array(
    z.object({
      report_id: z.string(),
      type: indicatorType,
      value: z.string(),
      labels_seen: z.record(z.string(), labelValue),
    }),
  ),
});

const escalateEcho = z.object({
  senior_id: z.string(),
  disputed_reports: z.array(z.string()),
});

const finalizeEcho = z.object({
  state: z.enum(["Open", "AwaitingSenior", "Finalized"]),
});

export type IndicatorPayload = z.infer<typeof indicatorPayload>;
export type ReportPayload = z.infer<typeof reportPayload>;
export type ReportListing = z.infer<typeof reportListing>;
export type DisputesBody = z.infer<typeof disputesBody>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(typeof detail === "string" ? detail : `request failed with ${status}`);
    this.name = "ApiError";
  }
}

export interface ClientOptions {
  baseUrl?: string;
  token: string;
  fetchFn?: typeof fetch;
}

export interface LabelRequest {
  type: IndicatorType;
  value: string;
  label: LabelValue;
  comment?: string;
}

/** Typed client for the annotation service; the only network surface. */
export function createClient(options: ClientOptions) {
  const base = (options.baseUrl ?? "").replace(/\/$/, "");
  const fetchFn = options.fetchFn ?? fetch;

  async function call(method: string, path: string, body?: unknown): Promise<Response> {
    const init: RequestInit = {
      method,
      headers: {
        "X-Analyst-Token": options.token,
        ...(body === undefined ? {} : { "Content-Type": "application/json" }),
      },
      ...(body === undefined ? {} : { body: JSON.stringify(body) }),
    };
    const response = await fetchFn(`${base}${path}`, init);
    if (!response.ok) {
      let detail: unknown = null;
      try {
        detail = (await response.json()).detail;
      } catch {
        detail = await response.text().catch(() => null);
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  return {
    async listReports(sessionId: string): Promise<ReportListing> {
      const response = await call("GET", `/sessions/${sessionId}/reports`);
      return reportListing.parse(await response.json());
    },

    async getReport(sessionId: string, reportId: string): Promise<ReportPayload> {
      const response = await call("GET", `/sessions/${sessionId}/reports/${reportId}`);
      return reportPayload.parse(await response.json());
    },

    async postLabel(sessionId: string, reportId: string, request: LabelRequest) {
      const response = await call(
        "POST",
        `/sessions/${sessionId}/reports/${reportId}/labels`,
        request,
      );
      return labelEcho.parse(await response.json());
    },

    async getDisputes(sessionId: string): Promise<DisputesBody> {
      const response = await call("GET", `/sessions/${sessionId}/disputes`);
      return disputesBody.parse(await response.json());
    },

    async escalate(sessionId: string, seniorId: string) {
      const response = await call("POST", `/sessions/${sessionId}/escalate`, {
        senior_id: seniorId,
      });
      return escalateEcho.parse(await response.json());
    },

    async finalize(sessionId: string) {
      const response = await call("POST", `/sessions/${sessionId}/finalize`);
      return finalizeEcho.parse(await response.json());
    },

    /** Raw dataset text, kept byte-exact for round-trip checks. */
    async fetchExportText(sessionId: string): Promise<string> {
      const response = await call("GET", `/sessions/${sessionId}/export`);
      return response.text();
    },
  };
}

export type Client = ReturnType<typeof createClient>;
