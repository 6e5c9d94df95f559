/**
 * Debounced request scheduling with last-write-wins semantics.
 *
 * One requester guards one control group: at most one request is in flight
 * at any time, newer payloads supersede older ones while waiting, and a
 * settled response is delivered only if no newer request has been issued
 * since. Rapid control changes therefore collapse into a single request
 * once the debounce window closes.
 */

export interface RequesterCallbacks<TReq, TRes> {
  send: (req: TReq) => Promise<TRes>;
  onResult: (res: TRes, req: TReq) => void;
  onError: (err: unknown, req: TReq) => void;
}

export class DebouncedRequester<TReq, TRes> {
  private readonly callbacks: RequesterCallbacks<TReq, TRes>;
  private readonly debounceMs: number;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private pending: TReq | null = null;
  private inflight = false;
  private issued = 0;

  constructor(callbacks: RequesterCallbacks<TReq, TRes>, debounceMs = 150) {
    this.callbacks = callbacks;
    this.debounceMs = debounceMs;
  }

  /** Queue a payload behind the debounce window, replacing any earlier one. */
  schedule(req: TReq): void {
    this.pending = req;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.flush();
    }, this.debounceMs);
  }

  /** Issue a payload without debouncing (initial load). */
  fire(req: TReq): void {
    this.pending = req;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.flush();
  }

  get isInflight(): boolean {
    return this.inflight;
  }

  dispose(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.pending = null;
    // orphan any in-flight settle
    this.issued++;
  }

  private flush(): void {
    if (this.pending === null || this.inflight) return;
    const req = this.pending;
    this.pending = null;
    const id = ++this.issued;
    this.inflight = true;
    this.callbacks.send(req).then(
      (res) => {
        this.inflight = false;
        if (id === this.issued) this.callbacks.onResult(res, req);
        this.flush();
      },
      (err) => {
        this.inflight = false;
        if (id === this.issued) this.callbacks.onError(err, req);
        this.flush();
      },
    );
  }
}
