/** Client-side threshold filtering over a server mapping result.
 *
 * The server keeps entries with confidence >= threshold, sorted by
 * confidence descending with control-id tiebreak. Filtering an already
 * filtered result at a HIGHER threshold reproduces exactly what the
 * server would return for that threshold (threshold monotonicity), so
 * the slider can move without re-querying as long as it stays at or
 * above the queried threshold. Below it, the caller must re-query.
 */

import type { MappingEntry, MappingResult } from './types';

/** The server's own filter rule, reproduced entry-for-entry. */
export function thresholdFilter(entries: MappingEntry[], threshold: number): MappingEntry[] {
  return entries
    .filter((e) => e.confidence >= threshold)
    .sort((a, b) => b.confidence - a.confidence || a.control_id.localeCompare(b.control_id));
}

/** True when the slider value can be served from the cached result. */
export function canFilterLocally(result: MappingResult, threshold: number): boolean {
  return threshold >= result.threshold;
}

export function visibleEntries(result: MappingResult, threshold: number): MappingEntry[] {
  if (!canFilterLocally(result, threshold)) {
    throw new Error(
      `cannot filter below the queried threshold (${threshold} < ${result.threshold}); re-query`,
    );
  }
  return thresholdFilter(result.results, threshold);
}

/** Confidence bar width in percent, clamped to [0, 100]. */
export function confidenceBarWidth(confidence: number): number {
  return Math.max(0, Math.min(100, Math.round(confidence * 100)));
}
