import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { beforeAll, describe, expect, it } from "vitest";

import { BundleFormatError, decodeArray, loadBundle } from "../src/bundle.js";
import { ViewerState } from "../src/state.js";

const here = dirname(fileURLToPath(import.meta.url));
const bundleText = readFileSync(join(here, "fixtures", "y_tube_bundle.json"), "utf-8");

let state: ViewerState;

beforeAll(() => {
  state = new ViewerState(loadBundle(bundleText));
});

describe("bundle loading", () => {
  it("parses the committed y_tube bundle", () => {
    expect(state.nodeIds.length).toBeGreaterThan(0);
    expect(state.bundle.axis.branches.length).toBeGreaterThan(0);
    expect(state.rootMarkers().length).toBe(state.bundle.axis.roots.length);
  });

  it("renders one root marker per component", () => {
    const twoComponent = JSON.parse(bundleText);
    twoComponent.axis.roots = [...twoComponent.axis.roots, 999999];
    const s = new ViewerState(twoComponent);
    expect(s.rootMarkers().length).toBe(2);
  });

  it("rejects corrupt input with a message, no partial state", () => {
    expect(() => loadBundle("{ not json")).toThrow(BundleFormatError);
    expect(() => loadBundle('{"schema_version": 99}')).toThrow(/schema version/);
    expect(() => loadBundle('{"schema_version": 1}')).toThrow(/missing/);
  });

  it("decodes plain and b64 arrays identically in shape", () => {
    const coords = decodeArray(state.bundle.axis.node_coords);
    expect(coords.length).toBe(state.nodeIds.length * 3);
  });
});

describe("obstruction readout", () => {
  it("client-side volume equals the bundle's precomputed aggregate for 20 random picks (exact)", () => {
    const stored = state.bundle.obstruction.downstream_volume;
    // deterministic LCG so the 20 picks are reproducible
    let s = 123456789;
    const rand = () => (s = (s * 1103515245 + 12345) % 2147483648) / 2147483648;
    for (let k = 0; k < 20; k++) {
      const id = state.nodeIds[Math.floor(rand() * state.nodeIds.length)];
      state.pickNode(id);
      const readout = state.readout()!;
      expect(readout.territoryVolume).toBe(stored[String(id)]);  // exact ===
    }
  });

  it("cross-checks every node, not just samples", () => {
    expect(state.verifyReadouts()).toEqual([]);
  });

  it("surface-area readout matches the bundle aggregates exactly", () => {
    const stored = state.bundle.obstruction.downstream_surface_area;
    for (const id of state.nodeIds) {
      expect(state.downstreamSurfaceArea(id)).toBe(stored[String(id)]);
    }
  });

  it("root pick covers the whole territory; leaf picks their own cells", () => {
    const root = state.bundle.axis.roots[0];
    state.pickNode(root);
    const seg = state.readoutSegmentation;
    const whole = Object.keys(seg.node_cell_count)
      .reduce((acc, k) => acc + seg.node_cell_count[k], 0);
    expect(state.readout()!.territoryCellCount).toBe(whole);

    const leaves = [...state.children.entries()]
      .filter(([, kids]) => kids.length === 0).map(([n]) => n);
    const leaf = leaves[0];
    state.pickNode(leaf);
    expect(state.readout()!.territoryCellCount).toBe(seg.node_cell_count[String(leaf)] ?? 0);
  });

  it("parent readout is never below its child's (monotone)", () => {
    for (const [child, parent] of state.parents) {
      expect(state.downstreamVolume(parent))
        .toBeGreaterThanOrEqual(state.downstreamVolume(child));
    }
  });

  it("picking off-axis is a no-op; picking near a node selects it", () => {
    state.picked = null;
    expect(state.pickAtPoint([9999, 9999, 9999], 0.5)).toBeNull();
    expect(state.picked).toBeNull();
    const i = 0;
    const p: [number, number, number] = [
      state.nodeCoords[3 * i], state.nodeCoords[3 * i + 1], state.nodeCoords[3 * i + 2]];
    expect(state.pickAtPoint(p, 0.5)).toBe(state.nodeIds[i]);
  });
});

describe("color synchronization", () => {
  it("artery and territory colors are identical for every node id", () => {
    const { artery, territory } = state.colorMaps();
    expect(artery.size).toBe(state.nodeIds.length);
    for (const [id, color] of artery) {
      expect(territory.get(id)).toBe(color);
    }
  });

  it("colors are deterministic across states", () => {
    const other = new ViewerState(loadBundle(bundleText));
    for (const id of state.nodeIds) {
      expect(other.colorForNode(id)).toBe(state.colorForNode(id));
    }
  });
});

describe("section plane", () => {
  it("no plane, or a plane below the model, shows everything", () => {
    state.sectionPlane = null;
    const all = state.territoryCellVisibility()!;
    expect(all.every((v) => v === 1)).toBe(true);
    state.sectionPlane = { point: [0, 0, -1000], normal: [0, 0, -1] };
    const below = state.territoryCellVisibility()!;
    expect(below.every((v) => v === 1)).toBe(true);
  });

  it("a plane above the model hides everything", () => {
    state.sectionPlane = { point: [0, 0, -1000], normal: [0, 0, 1] };
    const none = state.territoryCellVisibility()!;
    expect(none.every((v) => v === 0)).toBe(true);
  });

  it("a mid plane keeps exactly the cells on the kept side", () => {
    state.sectionPlane = { point: [0, 0, 2.0], normal: [0, 0, 1] };
    const vis = state.territoryCellVisibility()!;
    const centers = decodeArray(state.bundle.segmentation.territory!.cell_centers);
    let expected = 0;
    for (let i = 0; i < vis.length; i++) {
      if (centers[3 * i + 2] <= 2.0) expected++;
    }
    const kept = vis.reduce((a: number, v) => a + v, 0);
    expect(kept).toBe(expected);
    expect(kept).toBeGreaterThan(0);
    expect(kept).toBeLessThan(vis.length);
    state.sectionPlane = null;
  });

  it("labels (face owners) are untouched by clipping", () => {
    const seg = state.bundle.segmentation.territory!;
    const before = decodeArray(seg.surface_face_nodes);
    state.sectionPlane = { point: [0, 0, 2.0], normal: [0, 0, 1] };
    const after = decodeArray(seg.surface_face_nodes);
    expect(Array.from(after)).toEqual(Array.from(before));
    state.sectionPlane = null;
  });
});
