import { describe, expect, it } from "vitest";
import { ApiClient, ApiError } from "../src/api";

interface Recorded {
    url: string;
    init?: RequestInit;
}

function fakeFetch(handler: (url: string, init?: RequestInit) => Response) {
    const calls: Recorded[] = [];
    const fn = async (url: string, init?: RequestInit) => {
        calls.push({ url, init });
        return handler(url, init);
    };
    return { fn, calls };
}

const json = (body: unknown, status = 200) =>
    new Response(JSON.stringify(body), {
        status,
        headers: { "Content-Type": "application/json" },
    });

describe("ApiClient", () => {
    it("attaches the bearer token after login and drops it on logout", async () => {
        const { fn, calls } = fakeFetch((url) => {
            if (url.endsWith("/api/auth/login")) {
                return json({ token: "tok-1", user: { id: "u-1", username: "ana", isAdmin: false, groups: [] } });
            }
            return json([]);
        });
        const api = new ApiClient("http://x", fn);
        await api.login("ana", "pw");
        await api.listStations();
        const headers = calls[1].init?.headers as Record<string, string>;
        expect(headers["Authorization"]).toBe("Bearer tok-1");
        expect(api.authenticated).toBe(true);

        await api.logout();
        await api.listStations();
        const after = calls[3].init?.headers as Record<string, string>;
        expect(after["Authorization"]).toBeUndefined();
    });

    it("raises ApiError carrying the envelope code", async () => {
        const { fn } = fakeFetch(() =>
            json({ code: "not-found", message: "not found", detail: null }, 404));
        const api = new ApiClient("http://x", fn);
        const err = await api.seriesInfo("sr-ghost").catch((e) => e);
        expect(err).toBeInstanceOf(ApiError);
        expect(err.status).toBe(404);
        expect(err.code).toBe("not-found");
    });

    it("notifies the error hook", async () => {
        const { fn } = fakeFetch(() =>
            json({ code: "invalid", message: "bad window" }, 400));
        const api = new ApiClient("http://x", fn);
        const seen: string[] = [];
        api.onError = (e) => seen.push(e.code);
        await api.seriesData("sr-1", { from: "x" }).catch(() => undefined);
        expect(seen).toEqual(["invalid"]);
    });

    it("encodes query parameters for windows and filters", async () => {
        const { fn, calls } = fakeFetch(() => json({}));
        const api = new ApiClient("", fn);
        await api.seriesData("sr-1", { version: 2, from: "1990-01-01", to: "1990-02-01" });
        expect(calls[0].url).toBe(
            "/api/series/sr-1/data?version=2&from=1990-01-01&to=1990-02-01");
        await api.listStations({ kind: "rainfall" });
        expect(calls[1].url).toBe("/api/stations?kind=rainfall");
    });

    it("fill preview and commit differ only in the preview flag", async () => {
        const { fn, calls } = fakeFetch(() => json({}));
        const api = new ApiClient("", fn);
        await api.fillPreview("sr-1", "temporal-linear", { maxGapDays: 3 }, 1);
        await api.fillCommit("sr-1", "temporal-linear", { maxGapDays: 3 }, 1);
        const previewBody = JSON.parse(String(calls[0].init?.body));
        const commitBody = JSON.parse(String(calls[1].init?.body));
        expect(previewBody.preview).toBe(true);
        expect(commitBody.preview).toBe(false);
        expect(previewBody.baseVersion).toBe(1);
        expect(previewBody.method).toBe("temporal-linear");
        expect(commitBody.parameters).toEqual({ maxGapDays: 3 });
    });
});
