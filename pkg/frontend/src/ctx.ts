import type { ApiClient } from "./api.js";
import type { Store } from "./state.js";

/** Wiring handed to every panel: API client, shared state, error banner. */
export interface AppCtx {
    api: ApiClient;
    store: Store;
    banner: (message: string) => void;
}
