/**
 * Single in-memory view state shared by all panels.
 *
 * Panels subscribe and re-render; they only write state from user event
 * handlers, which keeps the update flow one-directional.
 */

import type { UserJson } from "./api.js";

export type PanelId = "map-list" | "plot" | "availability" | "fill-wizard" | "export";

export interface DateRange {
    from: string;
    to: string;
}

export interface ViewState {
    user: UserJson | null;
    panel: PanelId;
    selectedStationId: string | null;
    selectedSeriesId: string | null;
    compareSeriesIds: string[];
    exportSeriesIds: string[];
    exportRange: DateRange | null;
}

export function initialState(): ViewState {
    return {
        user: null,
        panel: "map-list",
        selectedStationId: null,
        selectedSeriesId: null,
        compareSeriesIds: [],
        exportSeriesIds: [],
        exportRange: null,
    };
}

export type Listener = (state: ViewState) => void;

export class Store {
    private state: ViewState;
    private listeners = new Set<Listener>();

    constructor(state: ViewState = initialState()) {
        this.state = state;
    }

    get(): ViewState {
        return this.state;
    }

    set(patch: Partial<ViewState>): void {
        this.state = { ...this.state, ...patch };
        for (const fn of [...this.listeners]) {
            fn(this.state);
        }
    }

    subscribe(fn: Listener): () => void {
        this.listeners.add(fn);
        return () => this.listeners.delete(fn);
    }
}

/**
 * Monotonic response gate: concurrent in-flight requests are tagged with
 * an issue sequence, and a response may only render if nothing newer has
 * rendered already. Late arrivals of superseded requests are dropped.
 */
export class SeqGate {
    private issued = 0;
    private rendered = 0;

    issue(): number {
        return ++this.issued;
    }

    accept(seq: number): boolean {
        if (seq <= this.rendered) {
            return false;
        }
        this.rendered = seq;
        return true;
    }
}
