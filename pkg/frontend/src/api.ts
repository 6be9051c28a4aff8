/**
 * Typed client for the basin service HTTP API.
 *
 * Every number the UI shows comes out of one of these responses; the
 * client never post-processes values beyond JSON decoding. The session
 * token lives in this object only, never in persistent storage.
 */

export interface UserJson {
    id: string;
    username: string;
    isAdmin: boolean;
    groups: string[];
}

export interface LoginResponse {
    token: string;
    user: UserJson;
}

export interface StationJson {
    id: string;
    externalId: string;
    name: string;
    kind: string;
    lat: number;
    lon: number;
    elevation: number;
    established: number;
    operator: string;
    catchmentId: string | null;
}

export interface PolygonJson {
    rings: number[][][];
}

export interface CatchmentJson {
    id: string;
    name: string;
    parentId: string | null;
    areaKm2: number;
    geometry: PolygonJson;
}

export interface LineageEntry {
    version: number;
    method: string | null;
    createdAt: string | null;
    createdBy: string | null;
    parameters: Record<string, unknown> | null;
}

export interface SeriesInfoJson {
    id: string;
    stationId: string;
    variable: string;
    currentVersion: number;
    versions: number[];
    studyAreaId: string;
    start: string;
    end: string;
    unit: string;
    lineage: LineageEntry[];
}

export interface SeriesListRow {
    id: string;
    stationId: string;
    variable: string;
    currentVersion: number;
    versions: number[];
    studyAreaId: string;
}

export interface SeriesDataJson {
    seriesId: string;
    version: number;
    start: string;
    end: string;
    values: (number | null)[];
    flags: string;
}

export interface StatsJson {
    sum: number | null;
    max: number | null;
    mean: number | null;
    min: number | null;
    presentCount: number;
    missingCount: number;
}

export interface TrendJson {
    slopePerYear: number;
    intercept: number;
    slopePerDay: number;
    n: number;
}

export interface StatsResponse {
    seriesId: string;
    version: number;
    stats: StatsJson;
    trend: TrendJson | null;
}

export interface GapReportJson {
    seriesId: string;
    version: number;
    gaps: [string, string][];
    totalMissing: number;
    fractionAvailable: number;
}

export interface AvailabilityRow {
    seriesId: string;
    fractionAvailable: number;
    gaps: [string, string][];
}

export interface AvailabilityResponse {
    from: string;
    to: string;
    series: AvailabilityRow[];
}

export interface OverlapResponse {
    start: string | null;
    end: string | null;
}

export interface CorrelationResponse {
    seriesIdA: string;
    seriesIdB: string;
    r: number;
    nJoint: number;
}

export interface FillPreviewJson {
    seriesId: string;
    baseVersion: number;
    method: string;
    parameters: Record<string, unknown>;
    sourceStationIds: string[];
    fills: [string, number][];
    fillCount: number;
}

export interface FillCommitResponse {
    committed: boolean;
    seriesId: string;
    version: number;
    fillCount: number;
}

export class ApiError extends Error {
    readonly status: number;
    readonly code: string;
    readonly detail: unknown;

    constructor(status: number, code: string, message: string, detail?: unknown) {
        super(message);
        this.name = "ApiError";
        this.status = status;
        this.code = code;
        this.detail = detail;
    }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
    private readonly base: string;
    private readonly fetchFn: FetchLike;
    private token: string | null = null;
    onError: ((err: ApiError) => void) | null = null;

    constructor(base = "", fetchFn?: FetchLike) {
        this.base = base.replace(/\/$/, "");
        this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
    }

    get authenticated(): boolean {
        return this.token !== null;
    }

    setToken(token: string | null): void {
        this.token = token;
    }

    private async request(path: string, init: RequestInit = {}): Promise<Response> {
        const headers: Record<string, string> = {
            ...(init.headers as Record<string, string> | undefined),
        };
        if (this.token) {
            headers["Authorization"] = `Bearer ${this.token}`;
        }
        const resp = await this.fetchFn(this.base + path, { ...init, headers });
        if (!resp.ok) {
            let code = "error";
            let message = `${resp.status}`;
            let detail: unknown;
            try {
                const body = await resp.json();
                code = body.code ?? code;
                message = body.message ?? message;
                detail = body.detail;
            } catch {
                // non-JSON error body, keep the status text
            }
            const err = new ApiError(resp.status, code, message, detail);
            if (this.onError) {
                this.onError(err);
            }
            throw err;
        }
        return resp;
    }

    private async getJson<T>(path: string): Promise<T> {
        const resp = await this.request(path);
        return resp.json() as Promise<T>;
    }

    private async postJson<T>(path: string, body: unknown): Promise<T> {
        const resp = await this.request(path, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
        return resp.json() as Promise<T>;
    }

    async login(username: string, password: string): Promise<LoginResponse> {
        const out = await this.postJson<LoginResponse>("/api/auth/login", {
            username,
            password,
        });
        this.token = out.token;
        return out;
    }

    async logout(): Promise<void> {
        if (!this.token) {
            return;
        }
        await this.postJson("/api/auth/logout", {});
        this.token = null;
    }

    listStations(filter?: { kind?: string; catchmentId?: string }): Promise<StationJson[]> {
        const params = new URLSearchParams();
        if (filter?.kind) {
            params.set("kind", filter.kind);
        }
        if (filter?.catchmentId) {
            params.set("catchmentId", filter.catchmentId);
        }
        const qs = params.toString();
        return this.getJson(`/api/stations${qs ? "?" + qs : ""}`);
    }

    listCatchments(): Promise<CatchmentJson[]> {
        return this.getJson("/api/catchments");
    }

    listSeries(filter?: { stationId?: string; variable?: string }): Promise<SeriesListRow[]> {
        const params = new URLSearchParams();
        if (filter?.stationId) {
            params.set("stationId", filter.stationId);
        }
        if (filter?.variable) {
            params.set("variable", filter.variable);
        }
        const qs = params.toString();
        return this.getJson(`/api/series${qs ? "?" + qs : ""}`);
    }

    seriesInfo(seriesId: string): Promise<SeriesInfoJson> {
        return this.getJson(`/api/series/${encodeURIComponent(seriesId)}`);
    }

    seriesData(seriesId: string, opts?: { version?: number; from?: string; to?: string }): Promise<SeriesDataJson> {
        const params = new URLSearchParams();
        if (opts?.version !== undefined) {
            params.set("version", String(opts.version));
        }
        if (opts?.from) {
            params.set("from", opts.from);
        }
        if (opts?.to) {
            params.set("to", opts.to);
        }
        const qs = params.toString();
        return this.getJson(`/api/series/${encodeURIComponent(seriesId)}/data${qs ? "?" + qs : ""}`);
    }

    seriesStats(seriesId: string, opts?: { version?: number }): Promise<StatsResponse> {
        const qs = opts?.version !== undefined ? `?version=${opts.version}` : "";
        return this.getJson(`/api/series/${encodeURIComponent(seriesId)}/stats${qs}`);
    }

    seriesGaps(seriesId: string, version?: number): Promise<GapReportJson> {
        const qs = version !== undefined ? `?version=${version}` : "";
        return this.getJson(`/api/series/${encodeURIComponent(seriesId)}/gaps${qs}`);
    }

    availability(seriesIds: string[], from: string, to: string): Promise<AvailabilityResponse> {
        return this.postJson("/api/analysis/availability", { seriesIds, from, to });
    }

    overlap(seriesIds: string[], minFraction: number): Promise<OverlapResponse> {
        return this.postJson("/api/analysis/overlap", { seriesIds, minFraction });
    }

    correlate(seriesIdA: string, seriesIdB: string): Promise<CorrelationResponse> {
        return this.postJson("/api/analysis/correlate", { seriesIdA, seriesIdB });
    }

    fillPreview(seriesId: string, method: string, parameters: Record<string, unknown>,
                baseVersion: number): Promise<FillPreviewJson> {
        return this.postJson(`/api/series/${encodeURIComponent(seriesId)}/fill`, {
            method,
            parameters,
            baseVersion,
            preview: true,
        });
    }

    fillCommit(seriesId: string, method: string, parameters: Record<string, unknown>,
               baseVersion: number): Promise<FillCommitResponse> {
        return this.postJson(`/api/series/${encodeURIComponent(seriesId)}/fill`, {
            method,
            parameters,
            baseVersion,
            preview: false,
        });
    }

    async exportSeries(body: {
        seriesIds: string[];
        formatSpec?: Record<string, unknown>;
        aggregation?: Record<string, unknown>;
        versions?: Record<string, number>;
    }): Promise<string> {
        const resp = await this.request("/api/export", {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
        return resp.text();
    }
}
