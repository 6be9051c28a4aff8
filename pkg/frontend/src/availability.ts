/**
 * Availability comparison: one horizontal bar per series over a shared
 * time axis, neutral where data exists and red over the gaps reported by
 * the availability endpoint. An overlap suggestion can be accepted into
 * the export date range.
 */

import type { AvailabilityResponse } from "./api.js";
import type { AppCtx } from "./ctx.js";
import { dayNumber, linScale, presentSpans } from "./render.js";
import { SeqGate } from "./state.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const BAR_W = 640;
const ROW_H = 26;
const LABEL_W = 130;

export async function mountAvailability(host: HTMLElement, ctx: AppCtx): Promise<void> {
    const seriesIds = ctx.store.get().compareSeriesIds;
    if (seriesIds.length === 0) {
        host.innerHTML = `<p class="placeholder">Tick "compare" on series in the station browser first.</p>`;
        return;
    }

    host.innerHTML = `
        <div class="avail-toolbar">
            <label>From <input type="date" class="avail-from"></label>
            <label>To <input type="date" class="avail-to"></label>
            <button class="avail-refresh">Refresh</button>
            <label>Min fraction <input type="number" class="overlap-fraction"
                min="0" max="1" step="0.05" value="0.8"></label>
            <button class="overlap-suggest">Suggest overlap</button>
        </div>
        <div class="avail-chart"></div>
        <div class="overlap-result"></div>
    `;

    const fromInput = host.querySelector<HTMLInputElement>(".avail-from")!;
    const toInput = host.querySelector<HTMLInputElement>(".avail-to")!;
    const chart = host.querySelector<HTMLElement>(".avail-chart")!;
    const overlapOut = host.querySelector<HTMLElement>(".overlap-result")!;
    const gate = new SeqGate();

    // Default window: the union of the selected series' spans.
    let infos;
    try {
        infos = await Promise.all(seriesIds.map((id) => ctx.api.seriesInfo(id)));
    } catch {
        ctx.banner("series metadata could not be loaded");
        return;
    }
    fromInput.value = infos.map((i) => i.start).sort()[0];
    toInput.value = infos.map((i) => i.end).sort().slice(-1)[0];

    const refresh = async () => {
        const seq = gate.issue();
        let resp: AvailabilityResponse;
        try {
            resp = await ctx.api.availability(seriesIds, fromInput.value, toInput.value);
        } catch {
            host.classList.add("stale");
            return;
        }
        if (!gate.accept(seq)) {
            return;
        }
        host.classList.remove("stale");
        drawChart(chart, resp);
    };

    host.querySelector(".avail-refresh")!.addEventListener("click", () => void refresh());

    host.querySelector(".overlap-suggest")!.addEventListener("click", async () => {
        const minFraction = Number(
            host.querySelector<HTMLInputElement>(".overlap-fraction")!.value);
        let result;
        try {
            result = await ctx.api.overlap(seriesIds, minFraction);
        } catch (err) {
            overlapOut.innerHTML = `<p class="inline-error">${(err as Error).message}</p>`;
            return;
        }
        if (result.start === null || result.end === null) {
            overlapOut.innerHTML = `<p>No qualifying overlap period.</p>`;
            drawBand(chart, null, fromInput.value, toInput.value);
            return;
        }
        const { start, end } = result;
        overlapOut.innerHTML = `
            <p>Suggested overlap: <b class="overlap-span">${start} to ${end}</b>
            <button class="overlap-accept">Use for export</button></p>`;
        drawBand(chart, [start, end], fromInput.value, toInput.value);
        overlapOut.querySelector(".overlap-accept")!.addEventListener("click", () => {
            ctx.store.set({
                exportRange: { from: start, to: end },
                exportSeriesIds: seriesIds,
            });
            overlapOut.insertAdjacentHTML("beforeend",
                `<p class="overlap-accepted">Export range set.</p>`);
        });
    });

    await refresh();
}

function drawChart(chart: HTMLElement, resp: AvailabilityResponse): void {
    chart.textContent = "";
    const doc = chart.ownerDocument;
    const height = resp.series.length * ROW_H + 24;
    const svg = doc.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${BAR_W} ${height}`);
    svg.setAttribute("class", "avail-svg");
    svg.dataset.from = resp.from;
    svg.dataset.to = resp.to;

    const x = xScale(resp.from, resp.to);

    resp.series.forEach((row, idx) => {
        const yTop = idx * ROW_H + 6;
        const group = doc.createElementNS(SVG_NS, "g");
        group.setAttribute("class", "avail-row");
        group.dataset.seriesId = row.seriesId;

        const label = doc.createElementNS(SVG_NS, "text");
        label.setAttribute("x", "4");
        label.setAttribute("y", String(yTop + 13));
        label.setAttribute("class", "avail-label");
        label.textContent = `${row.seriesId} (${row.fractionAvailable.toFixed(2)})`;
        group.appendChild(label);

        for (const [s0, s1] of presentSpans(resp.from, resp.to, row.gaps)) {
            group.appendChild(rect(doc, x(dayNumber(s0)), yTop,
                Math.max(1, x(dayNumber(s1) + 1) - x(dayNumber(s0))), "present-seg"));
        }
        for (const [g0, g1] of row.gaps) {
            group.appendChild(rect(doc, x(dayNumber(g0)), yTop,
                Math.max(1, x(dayNumber(g1) + 1) - x(dayNumber(g0))), "gap-seg"));
        }
        svg.appendChild(group);
    });

    const axis = doc.createElementNS(SVG_NS, "text");
    axis.setAttribute("x", String(LABEL_W));
    axis.setAttribute("y", String(height - 6));
    axis.setAttribute("class", "avail-axis");
    axis.textContent = `${resp.from}  ..  ${resp.to}`;
    svg.appendChild(axis);

    chart.appendChild(svg);
}

function drawBand(chart: HTMLElement, span: [string, string] | null,
                  from: string, to: string): void {
    const svg = chart.querySelector("svg");
    if (!svg) {
        return;
    }
    svg.querySelectorAll(".overlap-band").forEach((el) => el.remove());
    if (!span) {
        return;
    }
    const x = xScale(from, to);
    const height = Number(svg.getAttribute("viewBox")!.split(" ")[3]);
    const band = rect(svg.ownerDocument, x(dayNumber(span[0])), 2,
        Math.max(1, x(dayNumber(span[1]) + 1) - x(dayNumber(span[0]))), "overlap-band");
    band.setAttribute("height", String(height - 24));
    svg.appendChild(band);
}

function xScale(from: string, to: string): (day: number) => number {
    return linScale([dayNumber(from), dayNumber(to) + 1], [LABEL_W, BAR_W - 8]);
}

function rect(doc: Document, x: number, y: number, width: number, cls: string): SVGRectElement {
    const el = doc.createElementNS(SVG_NS, "rect") as SVGRectElement;
    el.setAttribute("x", String(x));
    el.setAttribute("y", String(y));
    el.setAttribute("width", String(width));
    el.setAttribute("height", "14");
    el.setAttribute("class", cls);
    return el;
}
