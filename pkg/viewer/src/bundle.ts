/** Parsing and typing of skelseg analysis bundles (schema version 1). */

export const SCHEMA_VERSION = 1;

export interface EncodedArray {
  encoding: "b64le" | "plain";
  dtype: "f32" | "f64" | "i32";
  shape: number[];
  data: string | number[] | number[][];
}

export interface MeshBlock {
  label: string;
  vertices: EncodedArray;
  faces: EncodedArray;
}

export interface SegmentationBlock {
  assignment: EncodedArray;
  cell_centers: EncodedArray;
  boundary_faces: EncodedArray;
  boundary_face_cells: EncodedArray;
  vertices: EncodedArray;
  surface_face_nodes: EncodedArray;
  node_volume: Record<string, number>;
  node_surface_area: Record<string, number>;
  node_cell_count: Record<string, number>;
  total_volume: number;
}

export interface BranchRow {
  id: number;
  parent: number | null;
  nodes: number[];
  length: number;
  artery_volume: number;
  artery_surface_area: number;
  artery_cell_count: number;
  thickness: number | null;
  territory_volume?: number;
  territory_surface_area?: number;
  territory_cell_count?: number;
}

export interface Bundle {
  schema_version: number;
  generator: string;
  config: Record<string, unknown>;
  meshes: { artery: MeshBlock; territory: MeshBlock | null };
  axis: {
    node_ids: EncodedArray;
    node_coords: EncodedArray;
    links: number[][];
    roots: number[];
    parents: Record<string, number>;
    branches: BranchRow[];
    node_branch: Record<string, number>;
  };
  segmentation: { artery: SegmentationBlock; territory: SegmentationBlock | null };
  obstruction: {
    downstream_volume: Record<string, number>;
    downstream_surface_area: Record<string, number>;
  };
  refinement: unknown[];
  timings: Record<string, number | null>;
}

export class BundleFormatError extends Error {}

function b64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  // node (vitest) path
  const buf = (globalThis as { Buffer?: { from(s: string, enc: string): Uint8Array } }).Buffer;
  if (!buf) throw new BundleFormatError("no base64 decoder available");
  return new Uint8Array(buf.from(b64, "base64"));
}

export function decodeArray(obj: EncodedArray): Float32Array | Float64Array | Int32Array {
  const count = obj.shape.reduce((a, b) => a * b, 1);
  if (obj.encoding === "plain") {
    const flat = (obj.data as number[] | number[][]).flat(Infinity) as number[];
    if (obj.dtype === "f32") return Float32Array.from(flat);
    if (obj.dtype === "f64") return Float64Array.from(flat);
    return Int32Array.from(flat);
  }
  const bytes = b64ToBytes(obj.data as string);
  const buf = bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.byteLength);
  // bundle arrays are little-endian; detect host endianness once
  const hostLE = new Uint8Array(new Uint32Array([1]).buffer)[0] === 1;
  if (!hostLE) throw new BundleFormatError("big-endian hosts are not supported");
  if (obj.dtype === "f32") return new Float32Array(buf, 0, count);
  if (obj.dtype === "f64") return new Float64Array(buf, 0, count);
  return new Int32Array(buf, 0, count);
}

export function loadBundle(text: string): Bundle {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (exc) {
    throw new BundleFormatError(`not valid JSON: ${(exc as Error).message}`);
  }
  const bundle = raw as Bundle;
  if (typeof bundle !== "object" || bundle === null) {
    throw new BundleFormatError("bundle is not an object");
  }
  if (bundle.schema_version !== SCHEMA_VERSION) {
    throw new BundleFormatError(
      `unsupported schema version ${bundle.schema_version} (viewer speaks ${SCHEMA_VERSION})`);
  }
  for (const key of ["meshes", "axis", "segmentation", "obstruction"] as const) {
    if (!(key in bundle)) throw new BundleFormatError(`bundle is missing '${key}'`);
  }
  if (!bundle.meshes.artery) throw new BundleFormatError("bundle has no artery mesh");
  return bundle;
}
