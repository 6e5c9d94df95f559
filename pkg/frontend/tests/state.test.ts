/**
 * Control panel state: defaults from /model/meta, admissible-value
 * clamping, and assignment extraction.
 */

import { describe, expect, it } from "vitest";

import {
  admissibleValue,
  assignments,
  clampModeK,
  clampModeT,
  findControl,
  initialControlState,
} from "../src/state.js";
import type { IndicatorSpec } from "../src/types.js";
import { makeMeta } from "./fixtures.js";

const meta = makeMeta();
const specOf = (name: string): IndicatorSpec =>
  findControl(initialControlState(meta), name).spec;

describe("initialControlState", () => {
  it("builds one free control per indicator, skipping block summaries", () => {
    const state = initialControlState(meta);
    expect(state.indicators.map((c) => c.spec.name)).toEqual([
      "age",
      "sex",
      "stage",
    ]);
    expect(state.indicators.every((c) => !c.fixed)).toBe(true);
  });

  it("defaults continuous controls to the admissible midpoint", () => {
    const state = initialControlState(meta);
    expect(findControl(state, "age").value).toBe(65);
  });

  it("defaults labeled and leveled controls to their first entry", () => {
    const state = initialControlState(meta);
    expect(findControl(state, "sex").value).toBe("F");
    expect(findControl(state, "stage").value).toBe(1);
  });

  it("starts with display defaults", () => {
    const state = initialControlState(meta);
    expect(state.colorBy).toBe("feature");
    expect(state.modeK).toBe(1);
    expect(state.modeT).toBe(0);
    expect(state.samples).toBe(1000);
  });
});

describe("admissibleValue", () => {
  it("clamps continuous values to the advertised range", () => {
    const age = specOf("age");
    expect(admissibleValue(age, 62.5)).toBe(62.5);
    expect(admissibleValue(age, 10)).toBe(40);
    expect(admissibleValue(age, 200)).toBe(90);
  });

  it("snaps leveled values to the nearest level", () => {
    const stage = specOf("stage");
    expect(admissibleValue(stage, 2.4)).toBe(2);
    expect(admissibleValue(stage, 2.6)).toBe(3);
    expect(admissibleValue(stage, -5)).toBe(1);
    expect(admissibleValue(stage, 99)).toBe(4);
  });

  it("passes known labels through and parses numeric strings", () => {
    const sex = specOf("sex");
    expect(admissibleValue(sex, "M")).toBe("M");
    const stage = specOf("stage");
    expect(admissibleValue(stage, "3")).toBe(3);
  });

  it("rejects strings that are neither labels nor numbers", () => {
    expect(() => admissibleValue(specOf("age"), "old")).toThrow(/not admissible/);
  });
});

describe("assignments", () => {
  it("collects only the fixed controls", () => {
    const state = initialControlState(meta);
    expect(assignments(state)).toEqual({});
    findControl(state, "age").fixed = true;
    findControl(state, "age").value = 62;
    findControl(state, "sex").value = "M"; // still free: must not appear
    expect(assignments(state)).toEqual({ age: 62 });
  });
});

describe("clamping", () => {
  it("bounds the mode slider to [-3, 3]", () => {
    expect(clampModeT(-9)).toBe(-3);
    expect(clampModeT(1.25)).toBe(1.25);
    expect(clampModeT(9)).toBe(3);
  });

  it("bounds the mode index to [1, rank]", () => {
    expect(clampModeK(0, 4)).toBe(1);
    expect(clampModeK(2.6, 4)).toBe(3);
    expect(clampModeK(99, 4)).toBe(4);
  });
});

describe("findControl", () => {
  it("throws on unknown indicator names", () => {
    expect(() => findControl(initialControlState(meta), "weight")).toThrow(
      /unknown indicator/,
    );
  });
});
