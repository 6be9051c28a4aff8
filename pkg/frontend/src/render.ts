/**
 * Pure drawing geometry: scales, path strings, gap segmentation and the
 * tiny equirectangular projection used for the station map. No DOM here.
 */

export type Pt = [number, number];

export interface BBox {
    minLon: number;
    maxLon: number;
    minLat: number;
    maxLat: number;
}

export function linScale(domain: [number, number], range: [number, number]): (v: number) => number {
    const [d0, d1] = domain;
    const [r0, r1] = range;
    const span = d1 - d0;
    if (span === 0) {
        return () => (r0 + r1) / 2;
    }
    return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

/**
 * Split a value array into runs of consecutive present slots. Each run
 * becomes one [index, value] point list; a null opens a new run, which is
 * what renders gaps as visible breaks instead of interpolated lines.
 */
export function seriesSegments(values: (number | null)[]): Pt[][] {
    const segments: Pt[][] = [];
    let current: Pt[] = [];
    values.forEach((v, i) => {
        if (v === null) {
            if (current.length > 0) {
                segments.push(current);
                current = [];
            }
            return;
        }
        current.push([i, v]);
    });
    if (current.length > 0) {
        segments.push(current);
    }
    return segments;
}

export function pathFrom(points: Pt[], x: (v: number) => number, y: (v: number) => number): string {
    return points
        .map(([px, py], i) => `${i === 0 ? "M" : "L"}${round2(x(px))},${round2(y(py))}`)
        .join("");
}

function round2(v: number): number {
    return Math.round(v * 100) / 100;
}

const MS_PER_DAY = 86400000;

export function dayNumber(iso: string): number {
    const [y, m, d] = iso.split("-").map(Number);
    return Date.UTC(y, m - 1, d) / MS_PER_DAY;
}

export function isoFromDayNumber(day: number): string {
    return new Date(day * MS_PER_DAY).toISOString().slice(0, 10);
}

export function isoAddDays(iso: string, n: number): string {
    return isoFromDayNumber(dayNumber(iso) + n);
}

/**
 * Complement of the gap list within [start, end]: the spans that hold
 * data. Gaps are expected sorted and non-overlapping, as the API returns
 * them. Used only to place neutral bar segments; the displayed numbers
 * (fractions) come from the API untouched.
 */
export function presentSpans(start: string, end: string, gaps: [string, string][]): [string, string][] {
    const spans: [string, string][] = [];
    let cursor = dayNumber(start);
    const last = dayNumber(end);
    for (const [gs, ge] of gaps) {
        const g0 = dayNumber(gs);
        const g1 = dayNumber(ge);
        if (g0 > cursor) {
            spans.push([isoFromDayNumber(cursor), isoFromDayNumber(g0 - 1)]);
        }
        cursor = Math.max(cursor, g1 + 1);
    }
    if (cursor <= last) {
        spans.push([isoFromDayNumber(cursor), isoFromDayNumber(last)]);
    }
    return spans;
}

export function ringsBBox(ringsList: number[][][][]): BBox {
    let minLon = Infinity;
    let maxLon = -Infinity;
    let minLat = Infinity;
    let maxLat = -Infinity;
    for (const rings of ringsList) {
        for (const ring of rings) {
            for (const [lon, lat] of ring) {
                minLon = Math.min(minLon, lon);
                maxLon = Math.max(maxLon, lon);
                minLat = Math.min(minLat, lat);
                maxLat = Math.max(maxLat, lat);
            }
        }
    }
    return { minLon, maxLon, minLat, maxLat };
}

export function growBBox(box: BBox, lon: number, lat: number): BBox {
    return {
        minLon: Math.min(box.minLon, lon),
        maxLon: Math.max(box.maxLon, lon),
        minLat: Math.min(box.minLat, lat),
        maxLat: Math.max(box.maxLat, lat),
    };
}

/**
 * Plate carree projection of the bbox into a padded pixel viewport with
 * the y axis flipped (north up). Good enough at basin scale.
 */
export function makeProjector(box: BBox, width: number, height: number, pad = 12):
        (lon: number, lat: number) => Pt {
    const x = linScale([box.minLon, box.maxLon], [pad, width - pad]);
    const y = linScale([box.minLat, box.maxLat], [height - pad, pad]);
    return (lon, lat) => [x(lon), y(lat)];
}

/** Compact display form; the exact value always rides in data-raw. */
export function fmtNumber(v: number | null): string {
    if (v === null) {
        return "n/a";
    }
    if (Number.isInteger(v)) {
        return String(v);
    }
    const rounded = Math.round(v * 10000) / 10000;
    return String(rounded);
}
