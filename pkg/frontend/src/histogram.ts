/**
 * Display preparation for posterior histograms.
 *
 * The service reports each histogram as bin edges plus per-bin probability
 * masses; everything here is presentation-side scaling of those numbers
 * (bar heights relative to the tallest bin). No statistics are computed
 * client-side.
 */

import type { HistogramPayload } from "./types.js";

export interface HistogramBar {
  /** Left and right bin edges in variable units. */
  x0: number;
  x1: number;
  /** Probability mass reported by the service. */
  mass: number;
  /** Bar height relative to the tallest bin, in [0, 1]. */
  height: number;
}

export interface HistogramRow {
  name: string;
  scale: "value" | "log";
  edges: number[];
  masses: number[];
  bars: HistogramBar[];
  /** True when one bin carries essentially all mass (a fixed variable). */
  spike: boolean;
}

/** Mass threshold above which a single bin counts as a spike. */
export const SPIKE_MASS = 0.999;

export const buildHistogramRow = (
  name: string,
  payload: HistogramPayload,
): HistogramRow => {
  const { edges, masses } = payload;
  const peak = masses.reduce((m, v) => (v > m ? v : m), 0);
  const bars: HistogramBar[] = masses.map((mass, i) => ({
    x0: edges[i],
    x1: edges[i + 1],
    mass,
    height: peak > 0 ? mass / peak : 0,
  }));
  return {
    name,
    scale: payload.scale,
    edges: [...edges],
    masses: [...masses],
    bars,
    spike: peak >= SPIKE_MASS,
  };
};

/** Build rows for every histogram in a report, in a stable name order. */
export const buildHistogramRows = (
  histograms: Record<string, HistogramPayload>,
  order?: string[],
): HistogramRow[] => {
  const names = order ?? Object.keys(histograms).sort();
  return names
    .filter((name) => name in histograms)
    .map((name) => buildHistogramRow(name, histograms[name]));
};
