/**
 * Pure view helpers: small functions from service data to presentation
 * values, kept free of DOM access so they are trivially unit-testable.
 */

import type { Agreement, EmojiState, TranscriptTurn } from "./api.js";
import { TOULMIN_LABELS, TRQF_LABELS } from "./api.js";

/** Emoji glyph per affect state. */
export const EMOJI_GLYPHS: Record<EmojiState, string> = {
  Neutral: "\u{1F610}",
  Happy: "\u{1F603}",
  Curious: "\u{1F9D0}",
  Confused: "\u{1F615}",
  Thinking: "\u{1F914}",
};

export function emojiFor(state: EmojiState): string {
  return EMOJI_GLYPHS[state];
}

/**
 * Label options for one turn's annotation picker. Teacher turns offer
 * only question-type labels, student turns only argument-element labels,
 * so a wrong-framework submission is impossible by construction.
 */
export function labelOptionsFor(turn: TranscriptTurn): readonly string[] {
  return turn.speaker.role === "Teacher" ? TRQF_LABELS : TOULMIN_LABELS;
}

/** CSS class encoding the verdict color. */
export function verdictClass(agreement: Agreement): string {
  return `verdict-${agreement.toLowerCase()}`;
}

/** Stagger delay (ms) for the i-th response bubble of one exchange. */
export function bubbleDelayMs(position: number): number {
  return position * 350;
}

export function formatEvenness(value: number | null): string {
  return value === null ? "n/a" : value.toFixed(2);
}

export function formatScore(score: number): string {
  return `${Math.round(score * 100)}% match`;
}

/** Grid coordinates for the 4x5 avatar layout, row-major. */
export function gridPosition(index: number): { row: number; column: number } {
  return { row: Math.floor(index / 5), column: index % 5 };
}
