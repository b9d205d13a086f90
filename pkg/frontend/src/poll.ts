/** Polling loop mirroring the agent's own cadence: one request per
 * interval, state applied atomically, UI notified once per poll. */

import type { GridState, PollDiff } from "./state";
import type { GridSnapshot } from "./types";

export interface GridSource {
  getGrid(): Promise<GridSnapshot>;
}

export class Poller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;

  constructor(
    private client: GridSource,
    private state: GridState,
    private intervalMs: number,
    private onPoll: (diff: PollDiff) => void,
  ) {}

  start(): void {
    if (this.timer !== null) {
      return;
    }
    void this.tickOnce();
    this.timer = setInterval(() => void this.tickOnce(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** One poll; overlapping ticks coalesce (slow responses never stack). */
  async tickOnce(): Promise<void> {
    if (this.inFlight) {
      return;
    }
    this.inFlight = true;
    try {
      const snapshot = await this.client.getGrid();
      this.onPoll(this.state.apply(snapshot));
    } catch {
      this.onPoll(this.state.markUnreachable());
    } finally {
      this.inFlight = false;
    }
  }
}
