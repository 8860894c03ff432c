/** three.js rendering of a loaded bundle.
 *
 * The artery and territory surfaces are drawn with per-face colors keyed by
 * the owning axis node (one shared palette, so segment colors match across
 * the two meshes). The axis is a line tree with clickable node points;
 * picking re-shades the downstream subtree and its subtended territory and
 * updates the readout panel. A z-position slider drives the section plane.
 */

import * as THREE from "three";
import { MeshBlock, SegmentationBlock, decodeArray } from "./bundle.js";
import { ViewerState } from "./state.js";

const DIMMED = new THREE.Color("#d8d2c8");

export class BundleRenderer {
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  readonly renderer: THREE.WebGLRenderer;
  private readonly state: ViewerState;
  private readonly raycaster = new THREE.Raycaster();
  private arterySurface!: THREE.Mesh;
  private territorySurface: THREE.Mesh | null = null;
  private axisPoints!: THREE.Points;
  private pickRadius: number;

  constructor(state: ViewerState, container: HTMLElement) {
    this.state = state;
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setSize(container.clientWidth, container.clientHeight);
    container.appendChild(this.renderer.domElement);
    this.camera = new THREE.PerspectiveCamera(
      50, container.clientWidth / container.clientHeight, 0.01, 1000);
    this.scene.background = new THREE.Color("#10141a");
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.45));
    const key = new THREE.DirectionalLight(0xffffff, 1.1);
    key.position.set(1, 2, 3);
    this.scene.add(key);

    this.buildMeshes();
    this.buildAxis();
    this.frameCamera();
    this.pickRadius = this.sceneRadius() / 25;

    this.renderer.domElement.addEventListener("pointerdown", (ev) => this.onPick(ev));
    this.renderer.setAnimationLoop(() => this.renderer.render(this.scene, this.camera));
  }

  private sceneRadius(): number {
    const box = new THREE.Box3().setFromObject(this.scene);
    return box.getSize(new THREE.Vector3()).length() / 2 || 1;
  }

  private buildSurface(mesh: MeshBlock, seg: SegmentationBlock,
                       opacity: number): THREE.Mesh {
    const verts = decodeArray(mesh.vertices) as Float32Array;
    const faces = decodeArray(mesh.faces) as Int32Array;
    const owners = decodeArray(seg.surface_face_nodes) as Int32Array;
    // non-indexed expansion so each face can carry its own color
    const pos = new Float32Array(faces.length * 3);
    const col = new Float32Array(faces.length * 3);
    const color = new THREE.Color();
    for (let f = 0; f < faces.length / 3; f++) {
      color.set(this.state.colorForNode(owners[f]));
      for (let k = 0; k < 3; k++) {
        const v = faces[3 * f + k];
        pos.set([verts[3 * v], verts[3 * v + 1], verts[3 * v + 2]], 9 * f + 3 * k);
        col.set([color.r, color.g, color.b], 9 * f + 3 * k);
      }
    }
    const geo = new THREE.BufferGeometry();
    geo.setAttribute("position", new THREE.BufferAttribute(pos, 3));
    geo.setAttribute("color", new THREE.BufferAttribute(col, 3));
    geo.computeVertexNormals();
    const mat = new THREE.MeshStandardMaterial({
      vertexColors: true,
      transparent: opacity < 1,
      opacity,
      side: THREE.DoubleSide,
    });
    const out = new THREE.Mesh(geo, mat);
    this.scene.add(out);
    return out;
  }

  private buildMeshes(): void {
    this.arterySurface = this.buildSurface(
      this.state.bundle.meshes.artery, this.state.bundle.segmentation.artery, 1.0);
    if (this.state.bundle.meshes.territory && this.state.bundle.segmentation.territory) {
      this.territorySurface = this.buildSurface(
        this.state.bundle.meshes.territory, this.state.bundle.segmentation.territory, 0.45);
    }
  }

  private buildAxis(): void {
    const coords = this.state.nodeCoords;
    const ids = this.state.nodeIds;
    const index = new Map<number, number>();
    ids.forEach((id, i) => index.set(id, i));

    const linePos: number[] = [];
    for (const [a, b] of this.state.bundle.axis.links) {
      const ia = index.get(a)!;
      const ib = index.get(b)!;
      linePos.push(coords[3 * ia], coords[3 * ia + 1], coords[3 * ia + 2],
                   coords[3 * ib], coords[3 * ib + 1], coords[3 * ib + 2]);
    }
    const lineGeo = new THREE.BufferGeometry();
    lineGeo.setAttribute("position", new THREE.BufferAttribute(Float32Array.from(linePos), 3));
    this.scene.add(new THREE.LineSegments(
      lineGeo, new THREE.LineBasicMaterial({ color: 0xf0f0f0 })));

    const ptGeo = new THREE.BufferGeometry();
    ptGeo.setAttribute("position", new THREE.BufferAttribute(coords.slice(), 3));
    this.axisPoints = new THREE.Points(ptGeo, new THREE.PointsMaterial({
      color: 0xffd166, size: 2.5, sizeAttenuation: false }));
    this.scene.add(this.axisPoints);

    for (const root of this.state.rootMarkers()) {
      const i = index.get(root)!;
      const marker = new THREE.Mesh(
        new THREE.SphereGeometry(this.sceneRadius() / 60, 12, 12),
        new THREE.MeshBasicMaterial({ color: 0xff4455 }));
      marker.position.set(coords[3 * i], coords[3 * i + 1], coords[3 * i + 2]);
      this.scene.add(marker);
    }
  }

  private frameCamera(): void {
    const box = new THREE.Box3().setFromObject(this.scene);
    const center = box.getCenter(new THREE.Vector3());
    const size = box.getSize(new THREE.Vector3()).length();
    this.camera.position.copy(center).add(new THREE.Vector3(size, size * 0.4, size * 0.9));
    this.camera.lookAt(center);
  }

  private onPick(ev: PointerEvent): void {
    const rect = this.renderer.domElement.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((ev.clientX - rect.left) / rect.width) * 2 - 1,
      -((ev.clientY - rect.top) / rect.height) * 2 + 1);
    this.raycaster.params.Points = { threshold: this.pickRadius };
    this.raycaster.setFromCamera(ndc, this.camera);
    const hits = this.raycaster.intersectObject(this.axisPoints);
    if (!hits.length || hits[0].index === undefined) return;  // no-op off-axis
    const picked = this.state.nodeIds[hits[0].index];
    this.state.pickNode(picked);
    this.refreshHighlight();
    document.dispatchEvent(new CustomEvent("skelseg:pick", { detail: picked }));
  }

  /** Re-shade both surfaces: downstream segments keep full color, the rest dims. */
  refreshHighlight(): void {
    const downstream = this.state.picked === null
      ? null : new Set(this.state.subtreeNodes(this.state.picked));
    this.shade(this.arterySurface, this.state.bundle.segmentation.artery, downstream);
    if (this.territorySurface && this.state.bundle.segmentation.territory) {
      this.shade(this.territorySurface, this.state.bundle.segmentation.territory, downstream);
    }
  }

  private shade(surface: THREE.Mesh, seg: SegmentationBlock,
                downstream: Set<number> | null): void {
    const owners = decodeArray(seg.surface_face_nodes) as Int32Array;
    const attr = surface.geometry.getAttribute("color") as THREE.BufferAttribute;
    const color = new THREE.Color();
    for (let f = 0; f < owners.length; f++) {
      if (downstream === null || downstream.has(owners[f])) {
        color.set(this.state.colorForNode(owners[f]));
      } else {
        color.copy(DIMMED);
      }
      for (let k = 0; k < 3; k++) attr.setXYZ(3 * f + k, color.r, color.g, color.b);
    }
    attr.needsUpdate = true;
  }

  /** Apply the state's section plane by masking hidden territory faces. */
  refreshClipping(): void {
    if (!this.territorySurface || !this.state.bundle.meshes.territory) return;
    const mesh = this.state.bundle.meshes.territory;
    const verts = decodeArray(mesh.vertices) as Float32Array;
    const faces = decodeArray(mesh.faces) as Int32Array;
    const visible = this.state.meshFaceVisibility(verts, faces);
    const pos = this.territorySurface.geometry.getAttribute("position") as THREE.BufferAttribute;
    for (let f = 0; f < visible.length; f++) {
      if (visible[f]) {
        for (let k = 0; k < 3; k++) {
          const v = faces[3 * f + k];
          pos.setXYZ(3 * f + k, verts[3 * v], verts[3 * v + 1], verts[3 * v + 2]);
        }
      } else {
        // collapse the face to a point: cheap hiding without re-indexing
        const v0 = faces[3 * f];
        for (let k = 0; k < 3; k++) {
          pos.setXYZ(3 * f + k, verts[3 * v0], verts[3 * v0 + 1], verts[3 * v0 + 2]);
        }
      }
    }
    pos.needsUpdate = true;
  }
}
