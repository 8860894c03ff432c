/** App wiring: bundle file input, panels, pick readout, section slider. */

import { Bundle, BundleFormatError, loadBundle } from "./bundle.js";
import { BundleRenderer } from "./render.js";
import { ViewerState } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function showError(message: string): void {
  const banner = el<HTMLDivElement>("error-banner");
  banner.textContent = message;
  banner.style.display = "block";
}

function fillBranchPanel(state: ViewerState): void {
  const tbody = el<HTMLTableSectionElement>("branch-rows");
  tbody.innerHTML = "";
  for (const b of state.bundle.axis.branches) {
    const tr = document.createElement("tr");
    const swatch = `<span class="swatch" style="background:${state.colorForNode(b.nodes[b.nodes.length - 1])}"></span>`;
    const cells = [
      `${swatch} ${b.id}`,
      b.parent === null ? "-" : String(b.parent),
      b.length.toFixed(3),
      b.artery_volume.toFixed(3),
      b.artery_surface_area.toFixed(3),
      b.thickness === null ? "-" : b.thickness.toFixed(3),
      b.territory_volume === undefined ? "-" : b.territory_volume.toFixed(3),
      b.territory_surface_area === undefined ? "-" : b.territory_surface_area.toFixed(3),
    ];
    tr.innerHTML = cells.map((c) => `<td>${c}</td>`).join("");
    tbody.appendChild(tr);
  }
}

function updateReadout(state: ViewerState): void {
  const box = el<HTMLDivElement>("readout");
  const r = state.readout();
  if (!r) {
    box.textContent = "click an axis node to designate an obstruction";
    return;
  }
  box.innerHTML = [
    `<b>obstruction at node ${r.node}</b>`,
    `downstream nodes: ${r.downstreamNodes.length}`,
    `territory volume at risk: ${r.territoryVolume.toFixed(4)}`,
    `territory surface area: ${r.territorySurfaceArea.toFixed(4)}`,
    `territory cells: ${r.territoryCellCount}; tube cells: ${r.arteryCellCount}`,
  ].join("<br>");
}

function start(bundle: Bundle): void {
  const state = new ViewerState(bundle);
  const mismatches = state.verifyReadouts();
  if (mismatches.length) {
    showError(`bundle aggregates disagree with client recomputation at nodes ${mismatches.slice(0, 5)}`);
    return;
  }
  const renderer = new BundleRenderer(state, el<HTMLDivElement>("scene"));
  fillBranchPanel(state);
  updateReadout(state);

  document.addEventListener("skelseg:pick", () => updateReadout(state));

  const slider = el<HTMLInputElement>("plane-z");
  const zs: number[] = [];
  for (let i = 2; i < state.nodeCoords.length; i += 3) zs.push(state.nodeCoords[i]);
  const lo = Math.min(...zs) - 2;
  const hi = Math.max(...zs) + 2;
  slider.min = String(lo);
  slider.max = String(hi);
  slider.step = String((hi - lo) / 200);
  slider.value = String(hi);
  slider.addEventListener("input", () => {
    const z = Number(slider.value);
    state.sectionPlane = z >= hi ? null
      : { point: [0, 0, z], normal: [0, 0, 1] };
    renderer.refreshClipping();
    el<HTMLSpanElement>("plane-label").textContent =
      state.sectionPlane ? `z = ${z.toFixed(2)}` : "off";
  });
}

el<HTMLInputElement>("bundle-file").addEventListener("change", async (ev) => {
  const input = ev.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  try {
    start(loadBundle(await file.text()));
    el<HTMLDivElement>("error-banner").style.display = "none";
  } catch (exc) {
    if (exc instanceof BundleFormatError) {
      showError(`cannot load bundle: ${exc.message}`);
    } else {
      showError(`unexpected failure: ${(exc as Error).message}`);
    }
  }
});
