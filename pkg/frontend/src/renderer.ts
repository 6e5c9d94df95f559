/**
 * Mesh rendering: scene-graph construction plus a canvas painter.
 *
 * buildSceneGraph is pure (no DOM): it validates the field, projects the
 * vertices through an orbiting perspective camera, colors vertices through
 * the colormap and depth-sorts the triangles for the painter's algorithm.
 * paintSceneGraph is the only part that touches a 2D context.
 */

import { colormap, cssColor } from "./colormap.js";

export interface Camera {
  /** Azimuth angle around the vertical axis, radians. */
  theta: number;
  /** Elevation angle from the horizontal plane, radians. */
  phi: number;
  /** Zoom factor; wheel input multiplies it. */
  zoom: number;
}

export interface Viewport {
  width: number;
  height: number;
}

export interface TriangleCommand {
  /** Projected corner coordinates in canvas pixels. */
  points: [number, number][];
  /** View-space depth used for painter ordering (larger = nearer). */
  depth: number;
  fill: string;
}

export interface SceneGraph {
  vertexCount: number;
  /** Projected vertex positions in canvas pixels. */
  projected: [number, number][];
  /** Per-vertex fill styles from the colormap. */
  vertexColors: string[];
  /** Triangles sorted back to front. */
  triangles: TriangleCommand[];
  legend: { min: number; max: number };
}

const PHI_LIMIT = Math.PI / 2 - 0.01;

export const defaultCamera = (): Camera => ({
  theta: Math.PI / 5,
  phi: Math.PI / 8,
  zoom: 1,
});

export const orbitCamera = (
  camera: Camera,
  dTheta: number,
  dPhi: number,
): Camera => ({
  theta: camera.theta + dTheta,
  phi: Math.min(PHI_LIMIT, Math.max(-PHI_LIMIT, camera.phi + dPhi)),
  zoom: camera.zoom,
});

export const zoomCamera = (camera: Camera, factor: number): Camera => ({
  theta: camera.theta,
  phi: camera.phi,
  zoom: Math.min(20, Math.max(0.05, camera.zoom * factor)),
});

/**
 * Project a mesh with a per-vertex scalar field into draw commands.
 *
 * Throws a RangeError before anything is drawn when the field length does
 * not match the vertex count.
 */
export const buildSceneGraph = (
  vertices: number[][],
  faces: number[][],
  field: number[],
  camera: Camera,
  viewport: Viewport,
): SceneGraph => {
  if (field.length !== vertices.length) {
    throw new RangeError(
      `field has ${field.length} values for ${vertices.length} vertices`,
    );
  }

  let lo = Infinity;
  let hi = -Infinity;
  for (const v of field) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) {
    lo = 0;
    hi = 0;
  }
  const span = hi - lo;
  // constant fields land on the colormap midpoint: one uniform color
  const normalized = field.map((v) => (span > 0 ? (v - lo) / span : 0.5));
  const vertexColors = normalized.map((t) => cssColor(colormap(t)));

  const center = [0, 0, 0];
  for (const v of vertices) {
    center[0] += v[0];
    center[1] += v[1];
    center[2] += v[2];
  }
  const n = Math.max(1, vertices.length);
  center[0] /= n;
  center[1] /= n;
  center[2] /= n;
  let radius = 1e-9;
  for (const v of vertices) {
    const d = Math.hypot(v[0] - center[0], v[1] - center[1], v[2] - center[2]);
    if (d > radius) radius = d;
  }

  const distance = 3 * radius;
  const cosP = Math.cos(camera.phi);
  const eye = [
    center[0] + distance * cosP * Math.cos(camera.theta),
    center[1] + distance * Math.sin(camera.phi),
    center[2] + distance * cosP * Math.sin(camera.theta),
  ];
  const fwd = normalize([
    center[0] - eye[0],
    center[1] - eye[1],
    center[2] - eye[2],
  ]);
  const right = normalize(cross(fwd, [0, 1, 0]));
  const up = cross(right, fwd);

  const focal = camera.zoom * Math.min(viewport.width, viewport.height) * 1.1;
  const projected: [number, number][] = [];
  const depths: number[] = [];
  for (const v of vertices) {
    const rel = [v[0] - eye[0], v[1] - eye[1], v[2] - eye[2]];
    const z = dot(rel, fwd);
    const x = dot(rel, right);
    const y = dot(rel, up);
    projected.push([
      viewport.width / 2 + (x / z) * focal,
      viewport.height / 2 - (y / z) * focal,
    ]);
    depths.push(z);
  }

  const triangles: TriangleCommand[] = faces.map((face) => {
    const [a, b, c] = face;
    const t =
      (normalized[a] ?? 0.5) + (normalized[b] ?? 0.5) + (normalized[c] ?? 0.5);
    return {
      points: [projected[a], projected[b], projected[c]],
      depth: (depths[a] + depths[b] + depths[c]) / 3,
      fill: cssColor(colormap(t / 3)),
    };
  });
  triangles.sort((p, q) => q.depth - p.depth);

  return {
    vertexCount: vertices.length,
    projected,
    vertexColors,
    triangles,
    legend: { min: lo, max: hi },
  };
};

/** Minimal 2D-context surface the painter needs (canvas-compatible). */
export interface PaintContext {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
}

export const paintSceneGraph = (
  ctx: PaintContext,
  graph: SceneGraph,
  viewport: Viewport,
): void => {
  ctx.clearRect(0, 0, viewport.width, viewport.height);
  ctx.lineWidth = 0.5;
  for (const tri of graph.triangles) {
    ctx.beginPath();
    ctx.moveTo(tri.points[0][0], tri.points[0][1]);
    ctx.lineTo(tri.points[1][0], tri.points[1][1]);
    ctx.lineTo(tri.points[2][0], tri.points[2][1]);
    ctx.closePath();
    ctx.fillStyle = tri.fill;
    ctx.fill();
    ctx.strokeStyle = "rgba(16,20,28,0.35)";
    ctx.stroke();
  }
};

const dot = (a: number[], b: number[]): number =>
  a[0] * b[0] + a[1] * b[1] + a[2] * b[2];

const cross = (a: number[], b: number[]): number[] => [
  a[1] * b[2] - a[2] * b[1],
  a[2] * b[0] - a[0] * b[2],
  a[0] * b[1] - a[1] * b[0],
];

const normalize = (a: number[]): number[] => {
  const len = Math.hypot(a[0], a[1], a[2]) || 1;
  return [a[0] / len, a[1] / len, a[2] / len];
};
