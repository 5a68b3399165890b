// Stable role colors; repeats after twelve roles.

const COLORS = [
  "#e8590c", "#2f9e44", "#1971c2", "#9c36b5", "#e03131", "#0c8599",
  "#f08c00", "#66a80f", "#3b5bdb", "#c2255c", "#099268", "#6741d9",
];

export function spanColor(role: number): string {
  return COLORS[role % COLORS.length];
}
