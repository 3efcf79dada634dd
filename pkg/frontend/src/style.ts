/** Checked-in deterministic styling: same spec in, same bytes out. */
export const WIDTH = 680;
export const HEIGHT = 440;
export const MARGIN = { left: 72, right: 24, top: 44, bottom: 56 };

export const FONT = "Helvetica, Arial, sans-serif";
export const FONT_SIZE = 12;
export const TITLE_SIZE = 14;

export const SERIES_COLORS = [
  "#1f6fb4",
  "#d1502f",
  "#2f8e57",
  "#8057b0",
  "#b08c2f",
  "#4f4f4f",
];

export const FAN_COLOR = "#1f6fb4";
export const FAN_OPACITY = 0.14;
export const LIMIT_COLOR = "#111111";
export const SKELETON_COLOR = "#d1502f";
export const BAND_COLOR = "#2f8e57";
export const BAND_OPACITY = 0.15;
export const GRID_COLOR = "#cccccc";
