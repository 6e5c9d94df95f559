/**
 * Browser bootstrap: builds the control panel from /model/meta, wires DOM
 * events into the controller and paints controller scenes onto the canvas.
 *
 * This is the only module that touches the document; everything it delegates
 * to (state, scene composition, projection) is DOM-free.
 */

import { createClient } from "./api.js";
import { gradientStops } from "./colormap.js";
import { ExplorerController, type ScenePresenter } from "./controller.js";
import {
  buildSceneGraph,
  defaultCamera,
  orbitCamera,
  paintSceneGraph,
  zoomCamera,
  type Camera,
  type PaintContext,
} from "./renderer.js";
import type { ExplorerScene } from "./scene.js";
import type { IndicatorControl } from "./state.js";
import type { ModelMeta } from "./types.js";

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

/** Compact numeric label for legends and axis edges. */
const fmt = (x: number): string =>
  Number.isFinite(x) ? String(Number(x.toPrecision(4))) : String(x);

const buildIndicatorRow = (
  control: IndicatorControl,
  controller: ExplorerController,
): HTMLElement => {
  const spec = control.spec;
  const row = document.createElement("div");
  row.className = "control-row";
  row.dataset.name = spec.name;

  const toggle = document.createElement("input");
  toggle.type = "checkbox";
  toggle.title = `fix ${spec.name}`;
  toggle.addEventListener("change", () => {
    row.classList.toggle("fixed", toggle.checked);
    controller.setFixed(spec.name, toggle.checked);
  });
  row.appendChild(toggle);

  const name = document.createElement("span");
  name.className = "name";
  name.textContent = `${spec.name} (${spec.kind})`;
  row.appendChild(name);

  const widget = document.createElement("div");
  widget.className = "widget";
  const current = document.createElement("span");
  current.className = "current";

  if (spec.labels && spec.labels.length) {
    const select = document.createElement("select");
    for (const label of spec.labels) {
      const option = document.createElement("option");
      option.value = label;
      option.textContent = label;
      select.appendChild(option);
    }
    select.value = String(control.value);
    select.addEventListener("change", () => {
      controller.setIndicatorValue(spec.name, select.value);
      current.textContent = select.value;
    });
    widget.appendChild(select);
  } else if (spec.admissible.levels ?? spec.levels) {
    const levels = (spec.admissible.levels ?? spec.levels) as number[];
    const select = document.createElement("select");
    for (const level of levels) {
      const option = document.createElement("option");
      option.value = String(level);
      option.textContent = String(level);
      select.appendChild(option);
    }
    select.value = String(control.value);
    select.addEventListener("change", () => {
      controller.setIndicatorValue(spec.name, Number(select.value));
      current.textContent = select.value;
    });
    widget.appendChild(select);
  } else {
    const lo = spec.admissible.min ?? 0;
    const hi = spec.admissible.max ?? 1;
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = String(lo);
    slider.max = String(hi);
    slider.step = String((hi - lo) / 200 || 1);
    slider.value = String(control.value);
    current.textContent = fmt(Number(control.value));
    slider.addEventListener("input", () => {
      controller.setIndicatorValue(spec.name, Number(slider.value));
      current.textContent = fmt(Number(slider.value));
    });
    widget.appendChild(slider);
  }

  widget.appendChild(current);
  row.appendChild(widget);
  return row;
};

const renderReadouts = (scene: ExplorerScene): void => {
  const host = el<HTMLDivElement>("readouts");
  host.textContent = "";
  for (const readout of scene.readouts) {
    const row = document.createElement("div");
    row.className = readout.fixed ? "readout-row fixed" : "readout-row";
    const name = document.createElement("span");
    name.className = "name";
    name.textContent = readout.name;
    const value = document.createElement("span");
    value.className = "value";
    // verbatim service value: no client-side rounding
    value.textContent = readout.value;
    const sd = document.createElement("span");
    sd.className = "sd";
    sd.textContent = `± ${readout.stddev}`;
    row.append(name, value, sd);
    host.appendChild(row);
  }
};

const renderHistograms = (scene: ExplorerScene): void => {
  const host = el<HTMLDivElement>("histograms");
  host.textContent = "";
  for (const hist of scene.histograms) {
    const row = document.createElement("div");
    row.className = hist.spike ? "hist-row spike" : "hist-row";

    const title = document.createElement("div");
    title.className = "hist-title";
    const label = document.createElement("span");
    label.textContent = hist.scale === "log" ? `${hist.name} (log)` : hist.name;
    const tag = document.createElement("span");
    tag.className = "spike-tag";
    tag.textContent = "fixed";
    title.append(label, tag);

    const bars = document.createElement("div");
    bars.className = "hist-bars";
    for (const bar of hist.bars) {
      const div = document.createElement("div");
      div.className = "bar";
      div.style.height = `${(bar.height * 100).toFixed(1)}%`;
      div.title = `[${fmt(bar.x0)}, ${fmt(bar.x1)}): ${bar.mass}`;
      bars.appendChild(div);
    }

    const edges = document.createElement("div");
    edges.className = "hist-edges";
    const lo = document.createElement("span");
    lo.textContent = fmt(hist.edges[0]);
    const hi = document.createElement("span");
    hi.textContent = fmt(hist.edges[hist.edges.length - 1]);
    edges.append(lo, hi);

    row.append(title, bars, edges);
    host.appendChild(row);
  }
};

const main = async (): Promise<void> => {
  const banner = el<HTMLSpanElement>("banner");
  const showBanner = (message: string): void => {
    banner.textContent = message;
    banner.classList.add("visible");
  };

  const client = createClient("");
  let meta: ModelMeta;
  try {
    meta = await client.meta();
  } catch (err) {
    showBanner(err instanceof Error ? err.message : String(err));
    return;
  }

  el<HTMLSpanElement>("model-info").textContent =
    `d=${meta.dimension}  N=${meta.vertex_count}  K=${meta.indicator_count}` +
    `  rank=${meta.rank}` +
    (meta.training_size !== null ? `  M=${meta.training_size}` : "");

  const canvas = el<HTMLCanvasElement>("canvas");
  const ctx = canvas.getContext("2d");
  let camera: Camera = defaultCamera();
  let lastScene: ExplorerScene | null = null;

  const paint = (): void => {
    if (!ctx) return;
    const dpr = window.devicePixelRatio || 1;
    const width = canvas.clientWidth * dpr;
    const height = canvas.clientHeight * dpr;
    if (canvas.width !== width) canvas.width = width;
    if (canvas.height !== height) canvas.height = height;
    const viewport = { width, height };
    ctx.clearRect(0, 0, width, height);
    const scene = lastScene;
    if (!scene || !scene.vertices || !scene.field || !meta.faces) return;
    const graph = buildSceneGraph(
      scene.vertices,
      meta.faces,
      scene.field,
      camera,
      viewport,
    );
    paintSceneGraph(ctx as unknown as PaintContext, graph, viewport);
    el<HTMLSpanElement>("legend-min").textContent = fmt(graph.legend.min);
    el<HTMLSpanElement>("legend-max").textContent = fmt(graph.legend.max);
  };

  const presenter: ScenePresenter = {
    renderScene(scene) {
      lastScene = scene;
      el<HTMLSpanElement>("legend-label").textContent = scene.fieldLabel;
      paint();
      renderReadouts(scene);
      renderHistograms(scene);
    },
    showBanner,
    clearBanner() {
      banner.textContent = "";
      banner.classList.remove("visible");
    },
  };

  const controller = new ExplorerController(client, meta, presenter);

  const controls = el<HTMLDivElement>("controls");
  for (const control of controller.state.indicators) {
    controls.appendChild(buildIndicatorRow(control, controller));
  }

  el<HTMLDivElement>("legend-strip").style.background =
    `linear-gradient(to right, ${gradientStops().join(", ")})`;

  el<HTMLInputElement>("colorby-feature").addEventListener("change", () =>
    controller.setColorBy("feature"),
  );
  el<HTMLInputElement>("colorby-stddev").addEventListener("change", () =>
    controller.setColorBy("stddev"),
  );

  const modeK = el<HTMLSelectElement>("mode-k");
  for (let k = 1; k <= controller.modeCount; k++) {
    const option = document.createElement("option");
    option.value = String(k);
    option.textContent = String(k);
    modeK.appendChild(option);
  }
  modeK.addEventListener("change", () => controller.setModeK(Number(modeK.value)));

  const modeT = el<HTMLInputElement>("mode-t");
  const modeTValue = el<HTMLSpanElement>("mode-t-value");
  modeT.addEventListener("input", () => {
    controller.setModeT(Number(modeT.value));
    modeTValue.textContent = modeT.value;
  });

  const samples = el<HTMLInputElement>("samples");
  samples.addEventListener("change", () =>
    controller.setSamples(Number(samples.value)),
  );

  canvas.addEventListener("pointerdown", (down) => {
    canvas.setPointerCapture(down.pointerId);
    let prev = { x: down.clientX, y: down.clientY };
    const move = (e: PointerEvent): void => {
      camera = orbitCamera(
        camera,
        (e.clientX - prev.x) * 0.01,
        (e.clientY - prev.y) * 0.01,
      );
      prev = { x: e.clientX, y: e.clientY };
      paint();
    };
    const up = (): void => {
      canvas.removeEventListener("pointermove", move);
      canvas.removeEventListener("pointerup", up);
    };
    canvas.addEventListener("pointermove", move);
    canvas.addEventListener("pointerup", up);
  });
  canvas.addEventListener(
    "wheel",
    (e) => {
      e.preventDefault();
      camera = zoomCamera(camera, Math.exp(-e.deltaY * 0.001));
      paint();
    },
    { passive: false },
  );
  window.addEventListener("resize", paint);

  controller.start();
};

void main();
