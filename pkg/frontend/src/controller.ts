/**
 * Explorer controller: the single event loop behind the control panel.
 *
 * Every control change funnels into one of two paths. Changes that alter
 * the posterior (fixing/releasing a variable, editing a fixed value,
 * changing the sample count) go through one debounced requester, so a burst
 * of edits issues exactly one /condition call and at most one request is in
 * flight. Changes that only alter presentation (color-by, mode selection,
 * mode slider) re-render the last report locally without touching the
 * service. A failed request shows a banner and keeps the previous scene.
 */

import { DebouncedRequester } from "./requester.js";
import { buildScene, type ExplorerScene } from "./scene.js";
import {
  admissibleValue,
  assignments,
  clampModeK,
  clampModeT,
  findControl,
  initialControlState,
  type ColorBy,
  type ControlPanelState,
} from "./state.js";
import type {
  ConditionReport,
  ConditionRequest,
  ModelMeta,
  ServiceClient,
} from "./types.js";

export interface ScenePresenter {
  renderScene(scene: ExplorerScene, report: ConditionReport): void;
  showBanner(message: string): void;
  clearBanner(): void;
}

export interface ControllerOptions {
  /** Debounce window for posterior-changing control edits, ms. */
  debounceMs?: number;
  /** Number of posterior modes to request (clamped to the model rank). */
  modes?: number;
  /** Histogram bin count sent with every request. */
  bins?: number;
  /** Sampling seed sent with every request. */
  seed?: number;
}

export class ExplorerController {
  readonly meta: ModelMeta;
  readonly state: ControlPanelState;
  /** Mode entries requested per report; upper bound for the k selector. */
  readonly modeCount: number;

  private readonly client: ServiceClient;
  private readonly presenter: ScenePresenter;
  private readonly bins: number;
  private readonly seed: number;
  private readonly requester: DebouncedRequester<ConditionRequest, ConditionReport>;
  private lastReport: ConditionReport | null = null;

  constructor(
    client: ServiceClient,
    meta: ModelMeta,
    presenter: ScenePresenter,
    options: ControllerOptions = {},
  ) {
    this.client = client;
    this.meta = meta;
    this.presenter = presenter;
    this.state = initialControlState(meta);
    this.modeCount = Math.max(1, Math.min(meta.rank, options.modes ?? 8));
    this.bins = options.bins ?? 30;
    this.seed = options.seed ?? 0;
    this.requester = new DebouncedRequester(
      {
        send: (req) => this.client.condition(req),
        onResult: (report) => this.handleReport(report),
        onError: (err) => this.handleError(err),
      },
      options.debounceMs ?? 150,
    );
  }

  /** Issue the initial (unconditional) request without debouncing. */
  start(): void {
    this.requester.fire(this.buildRequest());
  }

  get report(): ConditionReport | null {
    return this.lastReport;
  }

  /** Edit an indicator's value; re-conditions only if that variable is fixed. */
  setIndicatorValue(name: string, value: number | string): void {
    const control = findControl(this.state, name);
    control.value = admissibleValue(control.spec, value);
    if (control.fixed) this.scheduleCondition();
  }

  /** Fix or release an indicator; either direction re-conditions. */
  setFixed(name: string, fixed: boolean): void {
    const control = findControl(this.state, name);
    if (control.fixed === fixed) return;
    control.fixed = fixed;
    this.scheduleCondition();
  }

  setColorBy(colorBy: ColorBy): void {
    this.state.colorBy = colorBy;
    this.rerender();
  }

  setModeK(k: number): void {
    this.state.modeK = clampModeK(k, this.modeCount);
    this.rerender();
  }

  setModeT(t: number): void {
    this.state.modeT = clampModeT(t);
    this.rerender();
  }

  setSamples(n: number): void {
    const samples = Math.max(0, Math.round(n));
    if (samples === this.state.samples) return;
    this.state.samples = samples;
    this.scheduleCondition();
  }

  dispose(): void {
    this.requester.dispose();
  }

  private buildRequest(): ConditionRequest {
    return {
      assignments: assignments(this.state),
      samples: this.state.samples,
      modes: this.modeCount,
      bins: this.bins,
      seed: this.seed,
    };
  }

  private scheduleCondition(): void {
    this.requester.schedule(this.buildRequest());
  }

  private rerender(): void {
    if (this.lastReport === null) return;
    this.presenter.renderScene(
      buildScene(this.lastReport, this.meta, this.state),
      this.lastReport,
    );
  }

  private handleReport(report: ConditionReport): void {
    this.lastReport = report;
    this.presenter.clearBanner();
    this.presenter.renderScene(buildScene(report, this.meta, this.state), report);
  }

  private handleError(err: unknown): void {
    const message = err instanceof Error ? err.message : String(err);
    // previous scene stays up; the banner is the only change
    this.presenter.showBanner(message);
  }
}
