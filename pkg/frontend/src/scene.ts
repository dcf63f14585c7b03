// Pure scene geometry. Positions arrive as workspace percentages
// (0 = tissue rest surface, 100 = deepest reachable point); pixels come
// out. The needle is clipped at the tissue surface: nothing below the
// surface is ever drawn, mirroring what the server already hides.

export interface SceneLayout {
  width: number;
  height: number;
  pctTop: number;    // percentage mapped to y = 0
  pctBottom: number; // percentage mapped to y = height
}

export const DEFAULT_LAYOUT: SceneLayout = {
  width: 360,
  height: 480,
  pctTop: -20,
  pctBottom: 110,
};

export function yOfPct(pct: number, layout: SceneLayout): number {
  const span = layout.pctBottom - layout.pctTop;
  return ((pct - layout.pctTop) / span) * layout.height;
}

export interface NeedleSegment {
  x: number;
  yTop: number;
  yTip: number; // clipped: never below the tissue surface
}

export function needleSegment(
  needlePct: number,
  tissuePct: number,
  layout: SceneLayout,
): NeedleSegment {
  const tipY = yOfPct(needlePct, layout);
  const surfaceY = yOfPct(tissuePct, layout);
  return {
    x: layout.width / 2,
    yTop: 0,
    yTip: Math.min(tipY, surfaceY),
  };
}

export interface TissueRect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export function tissueRect(tissuePct: number, layout: SceneLayout): TissueRect {
  const surfaceY = yOfPct(tissuePct, layout);
  return { x: 0, y: surfaceY, width: layout.width, height: layout.height - surfaceY };
}

const clamp01 = (v: number) => Math.min(Math.max(v, 0), 1);

export function barWidth(visualBar: number, maxWidthPx: number): number {
  return clamp01(visualBar) * maxWidthPx;
}

// Finger gauge fill as a fraction of the actuator force bound.
export function gaugeLevel(stressN: number, maxForceN = 5): number {
  return clamp01(stressN / maxForceN);
}

export type FeedbackPanel =
  | { kind: "kinesthetic" }
  | { kind: "bar"; level: number }
  | { kind: "gauges"; index: number; thumb: number; hand: "dominant" | "contralateral" };

// Exactly one feedback channel is shown per modality.
export function feedbackPanel(
  modality: "HF" | "VF" | "CF" | "CCF",
  visualBar: number,
  indexStress: number,
  thumbStress: number,
): FeedbackPanel {
  switch (modality) {
    case "HF":
      return { kind: "kinesthetic" };
    case "VF":
      return { kind: "bar", level: clamp01(visualBar) };
    case "CF":
      return { kind: "gauges", index: gaugeLevel(indexStress), thumb: gaugeLevel(thumbStress), hand: "dominant" };
    case "CCF":
      return { kind: "gauges", index: gaugeLevel(indexStress), thumb: gaugeLevel(thumbStress), hand: "contralateral" };
  }
}
