import { describe, expect, it } from "vitest";
import { SeqGate, Store, initialState } from "../src/state";

describe("Store", () => {
    it("notifies subscribers with merged state", () => {
        const store = new Store();
        const seen: string[] = [];
        store.subscribe((s) => seen.push(s.panel));
        store.set({ panel: "plot" });
        store.set({ selectedStationId: "st-1" });
        expect(seen).toEqual(["plot", "plot"]);
        expect(store.get().selectedStationId).toBe("st-1");
        expect(store.get().panel).toBe("plot");
    });

    it("unsubscribe stops notifications", () => {
        const store = new Store();
        let calls = 0;
        const off = store.subscribe(() => calls++);
        store.set({ panel: "export" });
        off();
        store.set({ panel: "plot" });
        expect(calls).toBe(1);
    });

    it("starts on the station browser with nothing selected", () => {
        const s = initialState();
        expect(s.panel).toBe("map-list");
        expect(s.selectedSeriesId).toBeNull();
        expect(s.compareSeriesIds).toEqual([]);
        expect(s.user).toBeNull();
    });
});

describe("SeqGate", () => {
    it("accepts responses in order", () => {
        const gate = new SeqGate();
        const a = gate.issue();
        const b = gate.issue();
        expect(gate.accept(a)).toBe(true);
        expect(gate.accept(b)).toBe(true);
    });

    it("discards a stale response arriving after a newer one rendered", () => {
        const gate = new SeqGate();
        const first = gate.issue();
        const second = gate.issue();
        expect(gate.accept(second)).toBe(true);
        expect(gate.accept(first)).toBe(false);
    });

    it("discards duplicate renders of the same sequence", () => {
        const gate = new SeqGate();
        const seq = gate.issue();
        expect(gate.accept(seq)).toBe(true);
        expect(gate.accept(seq)).toBe(false);
    });
});
