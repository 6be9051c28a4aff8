/**
 * SVG basin map: catchment outlines drawn from the API polygon payloads
 * plus one circle marker per station, synced with the list selection.
 */

import type { CatchmentJson, StationJson } from "./api.js";
import { growBBox, makeProjector, pathFrom, ringsBBox } from "./render.js";

const SVG_NS = "http://www.w3.org/2000/svg";
export const MAP_WIDTH = 520;
export const MAP_HEIGHT = 420;

export interface MapHandlers {
    onSelect: (stationId: string) => void;
}

export function renderMap(host: HTMLElement, catchments: CatchmentJson[],
                          stations: StationJson[], selectedId: string | null,
                          handlers: MapHandlers): void {
    host.textContent = "";
    const doc = host.ownerDocument;
    const svg = doc.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${MAP_WIDTH} ${MAP_HEIGHT}`);
    svg.setAttribute("class", "basin-map");
    svg.setAttribute("role", "img");

    let box = ringsBBox(catchments.map((c) => c.geometry.rings));
    if (!Number.isFinite(box.minLon)) {
        box = { minLon: 0, maxLon: 1, minLat: 0, maxLat: 1 };
    }
    for (const st of stations) {
        box = growBBox(box, st.lon, st.lat);
    }
    const project = makeProjector(box, MAP_WIDTH, MAP_HEIGHT);

    for (const c of catchments) {
        for (const ring of c.geometry.rings) {
            const path = doc.createElementNS(SVG_NS, "path");
            const pts = ring.map(([lon, lat]) => project(lon, lat));
            path.setAttribute("d", pathFrom(pts, (v) => v, (v) => v) + "Z");
            path.setAttribute("class", "catchment-outline");
            path.setAttribute("data-catchment-id", c.id);
            svg.appendChild(path);
        }
    }

    for (const st of stations) {
        const [x, y] = project(st.lon, st.lat);
        const marker = doc.createElementNS(SVG_NS, "circle");
        marker.setAttribute("cx", String(x));
        marker.setAttribute("cy", String(y));
        const selected = st.id === selectedId;
        marker.setAttribute("r", selected ? "7" : "4.5");
        marker.setAttribute("class",
            `marker kind-${st.kind}${selected ? " selected" : ""}`);
        marker.setAttribute("data-station-id", st.id);
        const title = doc.createElementNS(SVG_NS, "title");
        title.textContent = `${st.name} (${st.kind})`;
        marker.appendChild(title);
        marker.addEventListener("click", () => handlers.onSelect(st.id));
        svg.appendChild(marker);
    }

    host.appendChild(svg);
}
