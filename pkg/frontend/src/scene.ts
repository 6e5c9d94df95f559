/**
 * Scene view model: one condition report + the control panel state in,
 * everything the presenter draws out.
 *
 * All displayed numbers are taken verbatim from the service response
 * (readouts are the stringified response values, histogram bars scale the
 * reported masses). The only client-side geometry is the mode slider: the
 * displayed mesh is prediction + t * displacement of the selected mode, so
 * t = 0 always shows the conditional mean itself.
 */

import { buildHistogramRows, type HistogramRow } from "./histogram.js";
import type { ControlPanelState } from "./state.js";
import type { ConditionReport, ModelMeta } from "./types.js";

export interface Readout {
  name: string;
  /** Stringified predicted value, exactly as the service reported it. */
  value: string;
  /** Stringified posterior standard deviation. */
  stddev: string;
  fixed: boolean;
}

export interface ExplorerScene {
  /** Mode-composed vertex positions, or null for layout-less models. */
  vertices: number[][] | null;
  /** Scalar field to color the mesh by, one value per vertex. */
  field: number[] | null;
  fieldLabel: string;
  readouts: Readout[];
  histograms: HistogramRow[];
  /** Variables named in the report's observed list (fixed server-side). */
  observed: string[];
}

const composeVertices = (
  report: ConditionReport,
  state: ControlPanelState,
): number[][] | null => {
  const base = report.prediction.vertices;
  if (base === null) return null;
  const mode = report.modes[state.modeK - 1];
  const t = state.modeT;
  if (!mode || mode.displacement === null || t === 0) {
    return base.map((v) => [...v]);
  }
  const disp = mode.displacement;
  return base.map((v, i) => [
    v[0] + t * disp[i][0],
    v[1] + t * disp[i][1],
    v[2] + t * disp[i][2],
  ]);
};

const composeField = (
  report: ConditionReport,
  state: ControlPanelState,
): { field: number[] | null; label: string } => {
  if (state.colorBy === "stddev") {
    return { field: report.stddev.vertex, label: "posterior stddev" };
  }
  const base = report.prediction.features;
  if (base === null) return { field: null, label: "feature" };
  const mode = report.modes[state.modeK - 1];
  const t = state.modeT;
  if (!mode || mode.feature_delta === null || t === 0) {
    return { field: [...base], label: "feature" };
  }
  const delta = mode.feature_delta;
  return { field: base.map((v, i) => v + t * delta[i]), label: "feature" };
};

export const buildScene = (
  report: ConditionReport,
  meta: ModelMeta,
  state: ControlPanelState,
): ExplorerScene => {
  const { field, label } = composeField(report, state);
  const names = state.indicators.map((c) => c.spec.name);
  const readouts: Readout[] = state.indicators.map((control) => {
    const name = control.spec.name;
    return {
      name,
      value: String(report.prediction.indicators[name]),
      stddev: String(report.stddev.indicator[name]),
      fixed: control.fixed,
    };
  });
  return {
    vertices: composeVertices(report, state),
    field,
    fieldLabel: label,
    readouts,
    histograms: buildHistogramRows(report.histograms, names),
    observed: [...report.observed],
  };
};
