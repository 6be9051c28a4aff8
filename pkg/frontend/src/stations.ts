/**
 * Station browser: map and list of the stored measurement stations, with
 * two-way selection sync. Picking a station loads its series, from which
 * the plot, comparison and fill panels are reached.
 */

import type { SeriesListRow, StationJson } from "./api.js";
import type { AppCtx } from "./ctx.js";
import { renderMap } from "./map.js";
import { SeqGate } from "./state.js";

const KINDS = ["", "gauging", "climate", "rainfall"];

export async function mountStationBrowser(host: HTMLElement, ctx: AppCtx): Promise<void> {
    host.innerHTML = `
        <div class="browser-toolbar">
            <label>Station kind
                <select class="kind-filter">
                    ${KINDS.map((k) => `<option value="${k}">${k || "all"}</option>`).join("")}
                </select>
            </label>
            <span class="station-count"></span>
        </div>
        <div class="browser-split">
            <div class="map-host"></div>
            <div class="list-host">
                <table class="station-table">
                    <thead>
                        <tr><th>Name</th><th>Kind</th><th>Lat</th><th>Lon</th><th>Elev.</th></tr>
                    </thead>
                    <tbody></tbody>
                </table>
            </div>
        </div>
        <div class="series-host"></div>
    `;

    const mapHost = host.querySelector<HTMLElement>(".map-host")!;
    const tbody = host.querySelector<HTMLTableSectionElement>("tbody")!;
    const filterSel = host.querySelector<HTMLSelectElement>(".kind-filter")!;
    const countEl = host.querySelector<HTMLElement>(".station-count")!;
    const seriesHost = host.querySelector<HTMLElement>(".series-host")!;
    const seriesGate = new SeqGate();

    let stations: StationJson[] = [];
    let catchments: Awaited<ReturnType<typeof ctx.api.listCatchments>> = [];

    const select = (stationId: string) => {
        ctx.store.set({ selectedStationId: stationId });
    };

    const renderAll = () => {
        const state = ctx.store.get();
        const kind = filterSel.value;
        const visible = kind ? stations.filter((s) => s.kind === kind) : stations;
        countEl.textContent = `${visible.length} stations`;

        renderMap(mapHost, catchments, visible, state.selectedStationId, {
            onSelect: select,
        });

        tbody.textContent = "";
        for (const st of visible) {
            const tr = host.ownerDocument.createElement("tr");
            tr.dataset.stationId = st.id;
            if (st.id === state.selectedStationId) {
                tr.className = "selected";
            }
            tr.innerHTML = `
                <td>${st.name}</td><td>${st.kind}</td>
                <td>${st.lat.toFixed(3)}</td><td>${st.lon.toFixed(3)}</td>
                <td>${st.elevation}</td>`;
            tr.addEventListener("click", () => select(st.id));
            tbody.appendChild(tr);
        }
    };

    const renderSeriesList = async (stationId: string | null) => {
        if (!stationId) {
            seriesHost.textContent = "";
            return;
        }
        const seq = seriesGate.issue();
        let rows: SeriesListRow[];
        try {
            rows = await ctx.api.listSeries({ stationId });
        } catch {
            host.classList.add("stale");
            return;
        }
        if (!seriesGate.accept(seq)) {
            return;
        }
        host.classList.remove("stale");
        const station = stations.find((s) => s.id === stationId);
        seriesHost.innerHTML = `
            <h3>Series at ${station ? station.name : stationId}</h3>
            <ul class="series-list"></ul>`;
        const ul = seriesHost.querySelector("ul")!;
        for (const row of rows) {
            const li = host.ownerDocument.createElement("li");
            li.dataset.seriesId = row.id;
            li.innerHTML = `
                <code>${row.id}</code> <span>${row.variable}</span>
                <button class="open-plot">plot</button>
                <button class="open-fill">fill gaps</button>
                <label><input type="checkbox" class="compare-check"> compare</label>`;
            li.querySelector<HTMLButtonElement>(".open-plot")!
                .addEventListener("click", () => {
                    ctx.store.set({ selectedSeriesId: row.id, panel: "plot" });
                });
            li.querySelector<HTMLButtonElement>(".open-fill")!
                .addEventListener("click", () => {
                    ctx.store.set({ selectedSeriesId: row.id, panel: "fill-wizard" });
                });
            const check = li.querySelector<HTMLInputElement>(".compare-check")!;
            check.checked = ctx.store.get().compareSeriesIds.includes(row.id);
            check.addEventListener("change", () => {
                const current = ctx.store.get().compareSeriesIds;
                const next = check.checked
                    ? [...current, row.id]
                    : current.filter((id) => id !== row.id);
                ctx.store.set({ compareSeriesIds: next });
            });
            ul.appendChild(li);
        }
    };

    filterSel.addEventListener("change", renderAll);

    let lastStationId: string | null = null;
    const unsubscribe = ctx.store.subscribe((state) => {
        if (!host.isConnected) {
            unsubscribe();
            return;
        }
        renderAll();
        if (state.selectedStationId !== lastStationId) {
            lastStationId = state.selectedStationId;
            void renderSeriesList(state.selectedStationId);
        }
    });

    try {
        [catchments, stations] = await Promise.all([
            ctx.api.listCatchments(),
            ctx.api.listStations(),
        ]);
    } catch {
        ctx.banner("station inventory could not be loaded");
        host.classList.add("stale");
        return;
    }
    renderAll();
    const selected = ctx.store.get().selectedStationId;
    lastStationId = selected;
    await renderSeriesList(selected);
}
