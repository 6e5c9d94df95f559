/**
 * Control panel state.
 *
 * Controls are built from /model/meta so every selectable value is
 * admissible by construction: ordinal/binary variables get their level list
 * (with labels when the service provides them), continuous variables get a
 * slider bounded by the advertised training min/max.
 */

import type { IndicatorSpec, ModelMeta } from "./types.js";
import { isIndicatorSpec } from "./types.js";

export type ColorBy = "feature" | "stddev";

export interface IndicatorControl {
  spec: IndicatorSpec;
  /** Level labels get sent as-is; the service resolves them to levels. */
  value: number | string;
  fixed: boolean;
}

export interface ControlPanelState {
  indicators: IndicatorControl[];
  colorBy: ColorBy;
  modeK: number;
  modeT: number;
  samples: number;
}

export const MODE_T_MIN = -3;
export const MODE_T_MAX = 3;

const defaultValue = (spec: IndicatorSpec): number | string => {
  if (spec.labels && spec.labels.length) return spec.labels[0];
  const levels = spec.admissible.levels ?? spec.levels;
  if (levels && levels.length) return levels[0];
  const lo = spec.admissible.min ?? 0;
  const hi = spec.admissible.max ?? lo;
  return (lo + hi) / 2;
};

export const initialControlState = (meta: ModelMeta): ControlPanelState => ({
  indicators: meta.specs.filter(isIndicatorSpec).map((spec) => ({
    spec,
    value: defaultValue(spec),
    fixed: false,
  })),
  colorBy: "feature",
  modeK: 1,
  modeT: 0,
  samples: 1000,
});

export const findControl = (
  state: ControlPanelState,
  name: string,
): IndicatorControl => {
  const control = state.indicators.find((c) => c.spec.name === name);
  if (!control) throw new Error(`unknown indicator ${JSON.stringify(name)}`);
  return control;
};

/** Clamp a proposed control value to the admissible set from /model/meta. */
export const admissibleValue = (
  spec: IndicatorSpec,
  value: number | string,
): number | string => {
  if (typeof value === "string") {
    if (spec.labels && spec.labels.includes(value)) return value;
    const parsed = Number(value);
    if (!Number.isFinite(parsed)) {
      throw new Error(`${spec.name}: ${JSON.stringify(value)} is not admissible`);
    }
    value = parsed;
  }
  const levels = spec.admissible.levels ?? spec.levels;
  if (levels && levels.length) {
    let best = levels[0];
    for (const level of levels) {
      if (Math.abs(level - value) < Math.abs(best - value)) best = level;
    }
    return best;
  }
  const lo = spec.admissible.min ?? -Infinity;
  const hi = spec.admissible.max ?? Infinity;
  return Math.min(hi, Math.max(lo, value));
};

/** Assignments for POST /condition: fixed controls only. */
export const assignments = (
  state: ControlPanelState,
): Record<string, number | string> => {
  const out: Record<string, number | string> = {};
  for (const control of state.indicators) {
    if (control.fixed) out[control.spec.name] = control.value;
  }
  return out;
};

export const clampModeT = (t: number): number =>
  Math.min(MODE_T_MAX, Math.max(MODE_T_MIN, t));

export const clampModeK = (k: number, rank: number): number =>
  Math.min(Math.max(1, Math.round(k)), Math.max(1, rank));
