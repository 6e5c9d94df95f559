/**
 * Wire types for the explorer service.
 *
 * These mirror the JSON schema in docs/api.md field for field. Block-level
 * payloads come in two variants: models fitted on mesh cohorts carry vertex
 * arrays, layout-less models carry flat per-component maps instead (the
 * unused variant is null).
 */

export type VariableKind = "continuous" | "binary" | "discrete" | "ordinal";
export type BlockName = "coordinate" | "feature" | "indicator";

/** Admissible range advertised by /model/meta for one variable. */
export interface AdmissibleRange {
  levels?: number[];
  min?: number;
  max?: number;
}

/** One indicator entry of /model/meta `specs`. */
export interface IndicatorSpec {
  name: string;
  kind: VariableKind;
  block: BlockName;
  marginal: "empirical" | "gaussian";
  levels: number[] | null;
  labels: string[] | null;
  admissible: AdmissibleRange;
}

/** Block summary entry of /model/meta `specs` (shape and feature rows). */
export interface BlockSummary {
  name: string;
  kind: "block-summary";
  block: BlockName;
  count: number;
}

export type SpecEntry = IndicatorSpec | BlockSummary;

export const isIndicatorSpec = (e: SpecEntry): e is IndicatorSpec =>
  e.kind !== "block-summary";

export interface ModelMeta {
  kind: "model-meta";
  dimension: number;
  vertex_count: number;
  indicator_count: number;
  rank: number;
  jitter: number;
  training_size: number | null;
  topology_checksum: string | null;
  faces: number[][] | null;
  eigenvalues: number[];
  specs: SpecEntry[];
}

export interface InstancePayload {
  indicators: Record<string, number>;
  vertices: number[][] | null;
  features: number[] | null;
  components: Record<string, number> | null;
}

export interface StddevPayload {
  indicator: Record<string, number>;
  vertex: number[] | null;
  feature: number[] | null;
  components: Record<string, number> | null;
}

export interface ModeEntry {
  k: number;
  eigenvalue: number;
  displacement: number[][] | null;
  feature_delta: number[] | null;
  delta: number[] | null;
  indicator_delta: Record<string, number>;
}

export interface HistogramPayload {
  scale: "value" | "log";
  edges: number[];
  masses: number[];
}

export interface ConditionRequest {
  assignments?: Record<string, number | string>;
  sigma?: number | Partial<Record<BlockName, number>>;
  samples?: number;
  modes?: number;
  bins?: number;
  seed?: number;
  rank?: number | null;
}

export interface ConditionReport {
  kind: "condition-report";
  request: {
    assignments: Record<string, number>;
    sigma: Record<BlockName, number>;
    samples: number;
    modes: number;
    bins: number;
    seed: number;
    rank: number | null;
  };
  observed: string[];
  prediction: InstancePayload;
  stddev: StddevPayload;
  modes: ModeEntry[];
  histograms: Record<string, HistogramPayload>;
}

export interface ModeReport {
  kind: "mode-instance";
  k: number;
  t: number;
  eigenvalue: number;
  latent_norm: number;
  instance: InstancePayload;
}

export interface SampleTable {
  kind: "sample-table";
  n: number;
  variables: string[];
  values: Record<string, number[]>;
}

export interface ServiceError {
  kind: "error";
  error: string;
  message: string;
}

/** Client of the four service endpoints. */
export interface ServiceClient {
  meta(): Promise<ModelMeta>;
  condition(req: ConditionRequest): Promise<ConditionReport>;
  mode(k: number, t: number): Promise<ModeReport>;
  sample(variables: string[] | null, n: number, seed: number): Promise<SampleTable>;
}
