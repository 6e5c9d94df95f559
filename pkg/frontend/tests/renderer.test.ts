/**
 * Scene-graph construction: field validation, vertex coloring, projection
 * bookkeeping and camera clamping.
 */

import { describe, expect, it } from "vitest";

import {
  buildSceneGraph,
  defaultCamera,
  orbitCamera,
  zoomCamera,
} from "../src/renderer.js";
import { makeMeta, OCTA_FACES, OCTA_VERTICES } from "./fixtures.js";

const VIEWPORT = { width: 640, height: 480 };

const graphFor = (field: number[]) =>
  buildSceneGraph(OCTA_VERTICES, OCTA_FACES, field, defaultCamera(), VIEWPORT);

describe("buildSceneGraph", () => {
  it("renders exactly the advertised vertex count", () => {
    const meta = makeMeta();
    const graph = graphFor([0, 1, 2, 3, 4, 5]);
    expect(graph.vertexCount).toBe(meta.vertex_count);
    expect(graph.projected).toHaveLength(meta.vertex_count);
    expect(graph.vertexColors).toHaveLength(meta.vertex_count);
    expect(graph.triangles).toHaveLength(OCTA_FACES.length);
  });

  it("a constant field paints every vertex and triangle the same color", () => {
    const graph = graphFor([0.7, 0.7, 0.7, 0.7, 0.7, 0.7]);
    const colors = new Set(graph.vertexColors);
    expect(colors.size).toBe(1);
    expect(new Set(graph.triangles.map((t) => t.fill)).size).toBe(1);
    expect(graph.legend).toEqual({ min: 0.7, max: 0.7 });
  });

  it("a checkerboard field alternates colors with vertex parity", () => {
    const field = OCTA_VERTICES.map((_, i) => i % 2);
    const graph = graphFor(field);
    const even = graph.vertexColors[0];
    const odd = graph.vertexColors[1];
    expect(even).not.toBe(odd);
    graph.vertexColors.forEach((color, i) => {
      expect(color).toBe(i % 2 === 0 ? even : odd);
    });
  });

  it("rejects a field whose length disagrees with the mesh", () => {
    expect(() => graphFor([1, 2, 3])).toThrow(RangeError);
    expect(() => graphFor([1, 2, 3])).toThrow(/3 values for 6 vertices/);
  });

  it("reports the field extrema for the legend", () => {
    const graph = graphFor([-2, 5, 0, 1, 1, 1]);
    expect(graph.legend).toEqual({ min: -2, max: 5 });
  });

  it("orders triangles back to front for the painter", () => {
    const depths = graphFor([0, 1, 2, 3, 4, 5]).triangles.map((t) => t.depth);
    for (let i = 1; i < depths.length; i++) {
      expect(depths[i]).toBeLessThanOrEqual(depths[i - 1]);
    }
  });

  it("projects every vertex inside a sane pixel range", () => {
    const graph = graphFor([0, 1, 2, 3, 4, 5]);
    for (const [x, y] of graph.projected) {
      expect(Number.isFinite(x)).toBe(true);
      expect(Number.isFinite(y)).toBe(true);
      expect(Math.abs(x - VIEWPORT.width / 2)).toBeLessThan(VIEWPORT.width);
      expect(Math.abs(y - VIEWPORT.height / 2)).toBeLessThan(VIEWPORT.height);
    }
  });
});

describe("camera", () => {
  it("orbit clamps elevation short of the poles", () => {
    let camera = defaultCamera();
    for (let i = 0; i < 100; i++) camera = orbitCamera(camera, 0.3, 0.3);
    expect(camera.phi).toBeLessThan(Math.PI / 2);
    for (let i = 0; i < 200; i++) camera = orbitCamera(camera, 0, -0.3);
    expect(camera.phi).toBeGreaterThan(-Math.PI / 2);
  });

  it("zoom multiplies within bounds", () => {
    let camera = defaultCamera();
    camera = zoomCamera(camera, 2);
    expect(camera.zoom).toBe(2);
    for (let i = 0; i < 50; i++) camera = zoomCamera(camera, 10);
    expect(camera.zoom).toBeLessThanOrEqual(20);
    for (let i = 0; i < 100; i++) camera = zoomCamera(camera, 0.01);
    expect(camera.zoom).toBeGreaterThanOrEqual(0.05);
  });

  it("orbiting moves the projected vertices", () => {
    const field = [0, 1, 2, 3, 4, 5];
    const before = buildSceneGraph(
      OCTA_VERTICES,
      OCTA_FACES,
      field,
      defaultCamera(),
      VIEWPORT,
    );
    const after = buildSceneGraph(
      OCTA_VERTICES,
      OCTA_FACES,
      field,
      orbitCamera(defaultCamera(), 0.8, 0.2),
      VIEWPORT,
    );
    expect(after.projected).not.toEqual(before.projected);
  });
});
