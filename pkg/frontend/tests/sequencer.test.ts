import { describe, expect, it } from "vitest";

import { Sequencer } from "../src/sequencer.js";

const tick = () => new Promise<void>((r) => setTimeout(r, 0));

describe("Sequencer", () => {
  it("runs a single task and reports its value", async () => {
    const seq = new Sequencer();
    const out = await seq.dispatch(async () => 42);
    expect(out).toEqual({ stale: false, value: 42 });
  });

  it("skips a task that was superseded before starting", async () => {
    const seq = new Sequencer();
    let gate: () => void = () => {};
    const blocked = new Promise<void>((r) => (gate = r));
    let ranSecond = false;

    const first = seq.dispatch(async () => {
      await blocked;
      return "a";
    });
    await tick(); // let the first task start
    const second = seq.dispatch(async () => {
      ranSecond = true;
      return "b";
    });
    const third = seq.dispatch(async () => "c");

    gate();
    const [r1, r2, r3] = await Promise.all([first, second, third]);
    expect(r1.stale).toBe(true); // completed but superseded
    expect(r1.value).toBe("a");
    expect(ranSecond).toBe(false); // never invoked
    expect(r2).toEqual({ stale: true });
    expect(r3).toEqual({ stale: false, value: "c" });
  });

  it("marks an in-flight task stale when a newer one arrives", async () => {
    const seq = new Sequencer();
    let gate: () => void = () => {};
    const blocked = new Promise<void>((r) => (gate = r));

    const first = seq.dispatch(async () => {
      await blocked;
      return 1;
    });
    await tick();
    const second = seq.dispatch(async () => 2);
    gate();
    expect((await first).stale).toBe(true);
    expect(await second).toEqual({ stale: false, value: 2 });
  });

  it("serializes tasks in dispatch order", async () => {
    const seq = new Sequencer();
    const order: string[] = [];
    let gate: () => void = () => {};
    const blocked = new Promise<void>((r) => (gate = r));

    const first = seq.dispatch(async () => {
      await blocked;
      order.push("first-done");
    });
    await tick();
    gate();
    await first;
    const second = seq.dispatch(async () => {
      order.push("second-start");
    });
    await second;
    expect(order).toEqual(["first-done", "second-start"]);
  });

  it("captures task errors instead of rejecting", async () => {
    const seq = new Sequencer();
    const boom = new Error("boom");
    const out = await seq.dispatch(async () => {
      throw boom;
    });
    expect(out.stale).toBe(false);
    expect(out.error).toBe(boom);
    // queue still usable afterwards
    expect(await seq.dispatch(async () => "ok")).toEqual({ stale: false, value: "ok" });
  });

  it("exposes a busy flag while work is pending", async () => {
    const seq = new Sequencer();
    expect(seq.busy).toBe(false);
    let gate: () => void = () => {};
    const blocked = new Promise<void>((r) => (gate = r));
    const p = seq.dispatch(async () => {
      await blocked;
    });
    expect(seq.busy).toBe(true);
    gate();
    await p;
    expect(seq.busy).toBe(false);
  });
});
