/**
 * Fetch-backed service client.
 *
 * Service errors arrive as JSON bodies {kind: "error", error, message} with
 * 4xx/5xx status; both are folded into ExplorerServiceError so callers can
 * show the message without inspecting status codes.
 */

import type {
  ConditionReport,
  ConditionRequest,
  ModeReport,
  ModelMeta,
  SampleTable,
  ServiceClient,
  ServiceError,
} from "./types.js";

export class ExplorerServiceError extends Error {
  readonly status: number;
  readonly error: string;

  constructor(status: number, error: string, message: string) {
    super(message);
    this.name = "ExplorerServiceError";
    this.status = status;
    this.error = error;
  }
}

const parseError = async (response: Response): Promise<ExplorerServiceError> => {
  let error = "HttpError";
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = (await response.json()) as ServiceError;
    if (body && body.kind === "error") {
      error = body.error;
      message = body.message;
    }
  } catch {
    // non-JSON error body: keep the status line
  }
  return new ExplorerServiceError(response.status, error, message);
};

const getJson = async <T>(url: string): Promise<T> => {
  const response = await fetch(url);
  if (!response.ok) throw await parseError(response);
  return (await response.json()) as T;
};

export const createClient = (baseUrl: string): ServiceClient => {
  const base = baseUrl.replace(/\/+$/, "");
  return {
    meta: () => getJson<ModelMeta>(`${base}/model/meta`),

    condition: async (req: ConditionRequest): Promise<ConditionReport> => {
      const response = await fetch(`${base}/condition`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(req),
      });
      if (!response.ok) throw await parseError(response);
      return (await response.json()) as ConditionReport;
    },

    mode: (k: number, t: number) =>
      getJson<ModeReport>(`${base}/mode?k=${k}&t=${t}`),

    sample: (variables: string[] | null, n: number, seed: number) => {
      const params = new URLSearchParams({ n: String(n), seed: String(seed) });
      if (variables && variables.length) {
        params.set("variables", variables.join(","));
      }
      return getJson<SampleTable>(`${base}/sample?${params.toString()}`);
    },
  };
};
