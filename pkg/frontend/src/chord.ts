// Chord layout math for the co-occurrence matrix. The server's matrix is
// the single source of counts; this module only turns it into angles.

import { chord, type Chords } from "d3-chord";

export interface ChordGroupArc {
  index: number;
  label: string;
  value: number;
  startAngle: number;
  endAngle: number;
}

export interface ChordRibbon {
  sourceIndex: number;
  targetIndex: number;
  value: number;
  source: { startAngle: number; endAngle: number };
  target: { startAngle: number; endAngle: number };
}

export interface ChordLayout {
  groups: ChordGroupArc[];
  ribbons: ChordRibbon[];
}

/** Drop all-zero classes so empty categories do not clutter the diagram. */
export function activeClasses(classes: string[], matrix: number[][]):
    { classes: string[]; matrix: number[][] } {
  const keep = classes
    .map((_c, i) => i)
    .filter((i) => matrix[i].some((v) => v > 0));
  return {
    classes: keep.map((i) => classes[i]),
    matrix: keep.map((i) => keep.map((j) => matrix[i][j])),
  };
}

export function computeChordLayout(classes: string[], matrix: number[][],
                                   padAngle = 0.03): ChordLayout {
  const layout = chord().padAngle(padAngle)(matrix) as Chords;
  const groups: ChordGroupArc[] = layout.groups.map((g) => ({
    index: g.index,
    label: classes[g.index],
    value: g.value,
    startAngle: g.startAngle,
    endAngle: g.endAngle,
  }));
  const ribbons: ChordRibbon[] = layout.map((r) => ({
    sourceIndex: r.source.index,
    targetIndex: r.target.index,
    value: r.source.value,
    source: { startAngle: r.source.startAngle, endAngle: r.source.endAngle },
    target: { startAngle: r.target.startAngle, endAngle: r.target.endAngle },
  }));
  return { groups, ribbons };
}

export function arcSpan(group: ChordGroupArc): number {
  return group.endAngle - group.startAngle;
}
