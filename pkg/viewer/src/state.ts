/** Viewer state: picking, what-if aggregation, clipping, synchronized colors.
 *
 * Everything here derives from the loaded bundle; no geometry is recomputed
 * beyond subtree traversal and plane-side tests, so no backend is needed.
 */

import { Bundle, SegmentationBlock, decodeArray } from "./bundle.js";

export interface Plane {
  point: [number, number, number];
  normal: [number, number, number];
}

export interface Readout {
  node: number;
  downstreamNodes: number[];
  territoryVolume: number;
  territorySurfaceArea: number;
  territoryCellCount: number;
  arteryCellCount: number;
}

export class ViewerState {
  readonly bundle: Bundle;
  readonly nodeIds: Int32Array;
  readonly nodeCoords: Float32Array;
  readonly children = new Map<number, number[]>();
  readonly parents = new Map<number, number>();
  picked: number | null = null;
  sectionPlane: Plane | null = null;
  readonly branchVisible = new Map<number, boolean>();

  private volumeTotals: Map<number, number> | null = null;
  private areaTotals: Map<number, number> | null = null;

  constructor(bundle: Bundle) {
    this.bundle = bundle;
    this.nodeIds = decodeArray(bundle.axis.node_ids) as Int32Array;
    this.nodeCoords = decodeArray(bundle.axis.node_coords) as Float32Array;
    for (const id of this.nodeIds) this.children.set(id, []);
    for (const [child, parent] of Object.entries(bundle.axis.parents)) {
      const c = Number(child);
      this.parents.set(c, parent);
      this.children.get(parent)?.push(c);
    }
    for (const kids of this.children.values()) kids.sort((a, b) => a - b);
    for (const b of bundle.axis.branches) this.branchVisible.set(b.id, true);
  }

  /** The segmentation the what-if readout reports on (territory if present). */
  get readoutSegmentation(): SegmentationBlock {
    return this.bundle.segmentation.territory ?? this.bundle.segmentation.artery;
  }

  rootMarkers(): number[] {
    return [...this.bundle.axis.roots];
  }

  /** Deterministic node color, shared verbatim by artery and territory. */
  colorForNode(nodeId: number): string {
    // golden-angle hue walk keyed by the node id
    const hue = (nodeId * 137.50776405003785) % 360;
    return `hsl(${hue.toFixed(3)}, 70%, 55%)`;
  }

  /** Per-mesh color maps; the synchronization contract makes them equal. */
  colorMaps(): { artery: Map<number, string>; territory: Map<number, string> } {
    const artery = new Map<number, string>();
    const territory = new Map<number, string>();
    for (const id of this.nodeIds) {
      artery.set(id, this.colorForNode(id));
      territory.set(id, this.colorForNode(id));
    }
    return { artery, territory };
  }

  /** Nearest axis node within `radius` of a world-space point, or null. */
  pickAtPoint(p: [number, number, number], radius: number): number | null {
    let best = -1;
    let bestD = radius * radius;
    for (let i = 0; i < this.nodeIds.length; i++) {
      const dx = this.nodeCoords[3 * i] - p[0];
      const dy = this.nodeCoords[3 * i + 1] - p[1];
      const dz = this.nodeCoords[3 * i + 2] - p[2];
      const d = dx * dx + dy * dy + dz * dz;
      if (d <= bestD) {
        bestD = d;
        best = this.nodeIds[i];
      }
    }
    if (best < 0) return null;
    this.picked = best;
    return best;
  }

  pickNode(nodeId: number): void {
    if (!this.children.has(nodeId)) {
      throw new Error(`node ${nodeId} is not on the axis`);
    }
    this.picked = nodeId;
  }

  subtreeNodes(nodeId: number): number[] {
    const out: number[] = [];
    const stack = [nodeId];
    while (stack.length) {
      const n = stack.pop()!;
      out.push(n);
      for (const c of this.children.get(n) ?? []) stack.push(c);
    }
    out.sort((a, b) => a - b);
    return out;
  }

  /** Post-order subtree totals, replicating the pipeline's float summation
   * order exactly: total(n) = own(n) + sum of child totals in ascending id
   * order, plain sequential additions. */
  private computeTotals(perNode: Record<string, number>): Map<number, number> {
    const totals = new Map<number, number>();
    for (const root of this.bundle.axis.roots) {
      const order: number[] = [];
      const stack = [root];
      while (stack.length) {
        const n = stack.pop()!;
        order.push(n);
        for (const c of this.children.get(n) ?? []) stack.push(c);
      }
      for (let i = order.length - 1; i >= 0; i--) {
        const n = order[i];
        let total = perNode[String(n)] ?? 0.0;
        for (const c of this.children.get(n) ?? []) {
          total = total + totals.get(c)!;
        }
        totals.set(n, total);
      }
    }
    return totals;
  }

  downstreamVolume(nodeId: number): number {
    if (!this.volumeTotals) {
      this.volumeTotals = this.computeTotals(this.readoutSegmentation.node_volume);
    }
    const v = this.volumeTotals.get(nodeId);
    if (v === undefined) throw new Error(`node ${nodeId} is not on the axis`);
    return v;
  }

  downstreamSurfaceArea(nodeId: number): number {
    if (!this.areaTotals) {
      this.areaTotals = this.computeTotals(this.readoutSegmentation.node_surface_area);
    }
    const a = this.areaTotals.get(nodeId);
    if (a === undefined) throw new Error(`node ${nodeId} is not on the axis`);
    return a;
  }

  /** What-if readout for the picked node, computed client-side. */
  readout(): Readout | null {
    if (this.picked === null) return null;
    const nodes = this.subtreeNodes(this.picked);
    const seg = this.readoutSegmentation;
    const artery = this.bundle.segmentation.artery;
    let cells = 0;
    let arteryCells = 0;
    for (const n of nodes) {
      cells += seg.node_cell_count[String(n)] ?? 0;
      arteryCells += artery.node_cell_count[String(n)] ?? 0;
    }
    return {
      node: this.picked,
      downstreamNodes: nodes,
      territoryVolume: this.downstreamVolume(this.picked),
      territorySurfaceArea: this.downstreamSurfaceArea(this.picked),
      territoryCellCount: cells,
      arteryCellCount: arteryCells,
    };
  }

  /** Cross-check: client-side readout against the bundle's precomputed
   * aggregates. Returns the node ids where they disagree (should be none). */
  verifyReadouts(): number[] {
    const bad: number[] = [];
    for (const id of this.nodeIds) {
      const stored = this.bundle.obstruction.downstream_volume[String(id)];
      if (stored !== this.downstreamVolume(id)) bad.push(id);
    }
    return bad;
  }

  /** Visibility of territory cells under the section plane: a cell is hidden
   * when its mass center lies on the normal side. */
  territoryCellVisibility(): Uint8Array | null {
    const seg = this.bundle.segmentation.territory;
    if (!seg) return null;
    const centers = decodeArray(seg.cell_centers) as Float32Array;
    const n = centers.length / 3;
    const out = new Uint8Array(n);
    if (!this.sectionPlane) {
      out.fill(1);
      return out;
    }
    for (let i = 0; i < n; i++) {
      out[i] = this.pointKept(centers[3 * i], centers[3 * i + 1], centers[3 * i + 2]) ? 1 : 0;
    }
    return out;
  }

  /** Visibility of a rendered surface's faces (by face centroid side). */
  meshFaceVisibility(vertices: Float32Array, faces: Int32Array): Uint8Array {
    const n = faces.length / 3;
    const out = new Uint8Array(n);
    if (!this.sectionPlane) {
      out.fill(1);
      return out;
    }
    for (let f = 0; f < n; f++) {
      let cx = 0, cy = 0, cz = 0;
      for (let k = 0; k < 3; k++) {
        const v = faces[3 * f + k];
        cx += vertices[3 * v] / 3;
        cy += vertices[3 * v + 1] / 3;
        cz += vertices[3 * v + 2] / 3;
      }
      out[f] = this.pointKept(cx, cy, cz) ? 1 : 0;
    }
    return out;
  }

  private pointKept(x: number, y: number, z: number): boolean {
    if (!this.sectionPlane) return true;
    const [px, py, pz] = this.sectionPlane.point;
    const [nx, ny, nz] = this.sectionPlane.normal;
    return (x - px) * nx + (y - py) * ny + (z - pz) * nz <= 0;
  }
}
