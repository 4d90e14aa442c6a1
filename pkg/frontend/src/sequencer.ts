/** Per-session request sequencing.
 *
 * One in-flight request per session: tasks queue behind the current one.
 * Every dispatch gets a sequence number; a task superseded by a newer
 * dispatch is skipped (never sent) or, if it already ran, its response is
 * marked stale so the caller drops it instead of rendering old results.
 */

export interface Settled<T> {
  stale: boolean;
  value?: T;
  error?: unknown;
}

export class Sequencer {
  private next = 0;
  private newest = -1;
  private active = 0;
  private inFlight: Promise<unknown> = Promise.resolve();

  dispatch<T>(task: () => Promise<T>): Promise<Settled<T>> {
    const seq = this.next++;
    this.newest = seq;
    this.active++;
    const run = this.inFlight.then(async (): Promise<Settled<T>> => {
      try {
        if (seq !== this.newest) return { stale: true };
        try {
          const value = await task();
          return { stale: seq !== this.newest, value };
        } catch (error) {
          return { stale: seq !== this.newest, error };
        }
      } finally {
        this.active--;
      }
    });
    this.inFlight = run.then(
      () => undefined,
      () => undefined,
    );
    return run;
  }

  get busy(): boolean {
    return this.active > 0;
  }
}
