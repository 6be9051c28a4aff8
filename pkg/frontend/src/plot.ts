/**
 * Series plot: time line with gaps drawn as breaks, statistics side panel
 * fed verbatim from the stats endpoint, and a version selector covering
 * the correction lineage. Windowing re-queries the API; nothing is
 * recomputed client-side.
 */

import type { SeriesDataJson, SeriesInfoJson, StatsResponse } from "./api.js";
import type { AppCtx } from "./ctx.js";
import { fmtNumber, linScale, pathFrom, seriesSegments } from "./render.js";
import { SeqGate } from "./state.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const PLOT_W = 640;
const PLOT_H = 300;
const PAD = 34;

export async function mountSeriesPlot(host: HTMLElement, ctx: AppCtx): Promise<void> {
    const seriesId = ctx.store.get().selectedSeriesId;
    if (!seriesId) {
        host.innerHTML = `<p class="placeholder">Pick a series in the station browser first.</p>`;
        return;
    }

    host.innerHTML = `
        <div class="plot-toolbar">
            <code class="plot-series-id">${seriesId}</code>
            <label>Version <select class="version-select"></select></label>
            <label>From <input type="date" class="win-from"></label>
            <label>To <input type="date" class="win-to"></label>
            <button class="win-apply">Apply window</button>
            <button class="win-reset">Full span</button>
        </div>
        <div class="plot-split">
            <div class="plot-host"></div>
            <aside class="stats-panel"><h3>Statistics</h3><dl class="stats-list"></dl></aside>
        </div>
    `;

    const versionSel = host.querySelector<HTMLSelectElement>(".version-select")!;
    const plotHost = host.querySelector<HTMLElement>(".plot-host")!;
    const statsList = host.querySelector<HTMLElement>(".stats-list")!;
    const fromInput = host.querySelector<HTMLInputElement>(".win-from")!;
    const toInput = host.querySelector<HTMLInputElement>(".win-to")!;
    const gate = new SeqGate();

    let info: SeriesInfoJson;
    try {
        info = await ctx.api.seriesInfo(seriesId);
    } catch {
        ctx.banner(`series ${seriesId} could not be loaded`);
        return;
    }

    for (const v of info.versions) {
        const opt = host.ownerDocument.createElement("option");
        opt.value = String(v);
        opt.textContent = v === 1 ? "1 (raw)" : String(v);
        versionSel.appendChild(opt);
    }
    versionSel.value = String(info.currentVersion);
    fromInput.value = info.start;
    toInput.value = info.end;

    const refresh = async () => {
        const seq = gate.issue();
        const version = Number(versionSel.value);
        const window = {
            version,
            from: fromInput.value || undefined,
            to: toInput.value || undefined,
        };
        let data: SeriesDataJson;
        let stats: StatsResponse;
        try {
            [data, stats] = await Promise.all([
                ctx.api.seriesData(seriesId, window),
                ctx.api.seriesStats(seriesId, { version }),
            ]);
        } catch {
            host.classList.add("stale");
            return;
        }
        if (!gate.accept(seq)) {
            return;
        }
        host.classList.remove("stale");
        drawPlot(plotHost, data, info.unit);
        drawStats(statsList, stats);
    };

    versionSel.addEventListener("change", () => void refresh());
    host.querySelector(".win-apply")!.addEventListener("click", () => void refresh());
    host.querySelector(".win-reset")!.addEventListener("click", () => {
        fromInput.value = info.start;
        toInput.value = info.end;
        void refresh();
    });

    await refresh();
}

function drawPlot(plotHost: HTMLElement, data: SeriesDataJson, unit: string): void {
    plotHost.textContent = "";
    const doc = plotHost.ownerDocument;
    const svg = doc.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${PLOT_W} ${PLOT_H}`);
    svg.setAttribute("class", "series-plot");

    const present = data.values.filter((v): v is number => v !== null);
    if (present.length === 0) {
        plotHost.textContent = "no data in window";
        return;
    }
    const lo = Math.min(...present);
    const hi = Math.max(...present);
    const x = linScale([0, Math.max(1, data.values.length - 1)], [PAD, PLOT_W - 8]);
    const y = linScale(lo === hi ? [lo - 1, hi + 1] : [lo, hi], [PLOT_H - 22, 8]);

    const segments = seriesSegments(data.values);
    for (const segment of segments) {
        if (segment.length === 1) {
            const [[i, v]] = segment;
            const dot = doc.createElementNS(SVG_NS, "circle");
            dot.setAttribute("cx", String(x(i)));
            dot.setAttribute("cy", String(y(v)));
            dot.setAttribute("r", "2.5");
            dot.setAttribute("class", "plot-point");
            svg.appendChild(dot);
            continue;
        }
        const line = doc.createElementNS(SVG_NS, "polyline");
        line.setAttribute("points",
            segment.map(([i, v]) => `${x(i)},${y(v)}`).join(" "));
        line.setAttribute("class", "plot-line");
        line.setAttribute("fill", "none");
        svg.appendChild(line);
    }

    const axis = doc.createElementNS(SVG_NS, "path");
    axis.setAttribute("d", pathFrom([[PAD, 8], [PAD, PLOT_H - 22], [PLOT_W - 8, PLOT_H - 22]],
        (v) => v, (v) => v));
    axis.setAttribute("class", "plot-axis");
    axis.setAttribute("fill", "none");
    svg.appendChild(axis);

    const labels: [string, number, number, string][] = [
        [data.start, PAD, PLOT_H - 8, "start"],
        [data.end, PLOT_W - 8, PLOT_H - 8, "end"],
        [`${fmtNumber(hi)} ${unit}`, PAD - 4, 12, "max"],
        [`${fmtNumber(lo)} ${unit}`, PAD - 4, PLOT_H - 24, "min"],
    ];
    for (const [text, lx, ly, cls] of labels) {
        const el = doc.createElementNS(SVG_NS, "text");
        el.setAttribute("x", String(lx));
        el.setAttribute("y", String(ly));
        el.setAttribute("class", `plot-label plot-label-${cls}`);
        el.textContent = text;
        svg.appendChild(el);
    }

    plotHost.appendChild(svg);
}

function drawStats(statsList: HTMLElement, resp: StatsResponse): void {
    statsList.textContent = "";
    const doc = statsList.ownerDocument;
    const entries: [string, string, number | null][] = [
        ["mean", "mean", resp.stats.mean],
        ["min", "min", resp.stats.min],
        ["max", "max", resp.stats.max],
        ["sum", "sum", resp.stats.sum],
        ["present days", "presentCount", resp.stats.presentCount],
        ["missing days", "missingCount", resp.stats.missingCount],
    ];
    if (resp.trend) {
        entries.push(["trend (per year)", "slopePerYear", resp.trend.slopePerYear]);
    }
    for (const [label, key, value] of entries) {
        const dt = doc.createElement("dt");
        dt.textContent = label;
        const dd = doc.createElement("dd");
        dd.dataset.stat = key;
        // data-raw carries the untouched API value for auditability
        dd.dataset.raw = value === null ? "null" : String(value);
        dd.textContent = fmtNumber(value);
        statsList.append(dt, dd);
    }
}
