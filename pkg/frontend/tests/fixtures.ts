/**
 * Canned service payloads for tests: a small octahedron model with three
 * indicators, shaped exactly like the live service responses.
 */

import type {
  ConditionReport,
  ConditionRequest,
  HistogramPayload,
  ModelMeta,
} from "../src/types.js";

export const OCTA_VERTICES: number[][] = [
  [1, 0, 0],
  [-1, 0, 0],
  [0, 1, 0],
  [0, -1, 0],
  [0, 0, 1],
  [0, 0, -1],
];

export const OCTA_FACES: number[][] = [
  [0, 2, 4],
  [2, 1, 4],
  [1, 3, 4],
  [3, 0, 4],
  [2, 0, 5],
  [1, 2, 5],
  [3, 1, 5],
  [0, 3, 5],
];

export const makeMeta = (): ModelMeta => ({
  kind: "model-meta",
  dimension: 27,
  vertex_count: 6,
  indicator_count: 3,
  rank: 4,
  jitter: 1e-6,
  training_size: 40,
  topology_checksum: "0c7a",
  faces: OCTA_FACES.map((f) => [...f]),
  eigenvalues: [5.1, 2.4, 1.2, 0.6],
  specs: [
    { name: "shape", kind: "block-summary", block: "coordinate", count: 18 },
    { name: "feature", kind: "block-summary", block: "feature", count: 6 },
    {
      name: "age",
      kind: "continuous",
      block: "indicator",
      marginal: "empirical",
      levels: null,
      labels: null,
      admissible: { min: 40, max: 90 },
    },
    {
      name: "sex",
      kind: "binary",
      block: "indicator",
      marginal: "empirical",
      levels: [0, 1],
      labels: ["F", "M"],
      admissible: { levels: [0, 1] },
    },
    {
      name: "stage",
      kind: "ordinal",
      block: "indicator",
      marginal: "empirical",
      levels: [1, 2, 3, 4],
      labels: null,
      admissible: { levels: [1, 2, 3, 4] },
    },
  ],
});

const flatHistogram = (lo: number, hi: number, bins = 10): HistogramPayload => {
  const edges: number[] = [];
  for (let i = 0; i <= bins; i++) edges.push(lo + ((hi - lo) * i) / bins);
  return { scale: "value", edges, masses: new Array(bins).fill(1 / bins) };
};

const spikeHistogram = (lo: number, hi: number, bins = 10): HistogramPayload => {
  const flat = flatHistogram(lo, hi, bins);
  const masses = new Array(bins).fill(0);
  masses[Math.floor(bins / 2)] = 1.0;
  return { scale: flat.scale, edges: flat.edges, masses };
};

export interface ReportOverrides {
  indicators?: Record<string, number>;
  stddev?: Record<string, number>;
  vertexShift?: number;
}

/** A condition report consistent with makeMeta() for the given request. */
export const makeReport = (
  request: ConditionRequest = {},
  overrides: ReportOverrides = {},
): ConditionReport => {
  const fixed = Object.keys(request.assignments ?? {}).sort();
  const resolved: Record<string, number> = {};
  for (const [name, value] of Object.entries(request.assignments ?? {})) {
    resolved[name] = typeof value === "string" ? (value === "M" ? 1 : 0) : value;
  }
  const shift = overrides.vertexShift ?? (fixed.length ? 0.25 : 0);
  const indicators = {
    age: 63.75,
    sex: 0.4,
    stage: 2.5,
    ...overrides.indicators,
  };
  const stddev = {
    age: 11.25,
    sex: 0.5,
    stage: 1.1,
    ...overrides.stddev,
  };
  const histogram = (name: string, lo: number, hi: number): HistogramPayload =>
    fixed.includes(name) ? spikeHistogram(lo, hi) : flatHistogram(lo, hi);

  return {
    kind: "condition-report",
    request: {
      assignments: resolved,
      sigma: { coordinate: 0, feature: 0, indicator: 0 },
      samples: request.samples ?? 1000,
      modes: request.modes ?? 8,
      bins: request.bins ?? 30,
      seed: request.seed ?? 0,
      rank: request.rank ?? null,
    },
    observed: fixed,
    prediction: {
      indicators,
      vertices: OCTA_VERTICES.map((v) => [v[0] + shift, v[1], v[2]]),
      features: [0.1, 0.9, 0.3, 0.7, 0.5, 0.2],
      components: null,
    },
    stddev: {
      indicator: stddev,
      vertex: [0.05, 0.04, 0.06, 0.05, 0.03, 0.07],
      feature: [0.01, 0.02, 0.01, 0.02, 0.01, 0.02],
      components: null,
    },
    modes: [1, 2, 3, 4].map((k) => ({
      k,
      eigenvalue: [5.1, 2.4, 1.2, 0.6][k - 1],
      displacement: OCTA_VERTICES.map((_, i) => [0.1 * k, 0.01 * i, 0]),
      feature_delta: [0.1, -0.1, 0.1, -0.1, 0.1, -0.1].map((d) => d * k),
      delta: null,
      indicator_delta: { age: 2.0 * k, sex: 0.1 * k, stage: 0.3 * k },
    })),
    histograms: {
      age: histogram("age", 40, 90),
      sex: histogram("sex", 0, 1),
      stage: histogram("stage", 1, 4),
    },
  };
};
