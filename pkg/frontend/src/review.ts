/** Verdict state for one mapping under review.
 *
 * One verdict per proposed control (pending, accepted, or rejected), so
 * the accepted and rejected sets are disjoint by construction; toggling
 * a control before submission keeps only the final verdict. State
 * transitions are pure functions of (server response, local verdicts).
 */

import type { FeedbackRequest, MappingResult } from './types';

export type Verdict = 'pending' | 'accepted' | 'rejected';

export interface ReviewState {
  mapping: MappingResult;
  verdicts: Record<string, Verdict>;
  submitted: boolean;
}

export function newReview(mapping: MappingResult): ReviewState {
  const verdicts: Record<string, Verdict> = {};
  for (const entry of mapping.results) {
    verdicts[entry.control_id] = 'pending';
  }
  return { mapping, verdicts, submitted: false };
}

export function setVerdict(state: ReviewState, controlId: string, verdict: Verdict): ReviewState {
  if (!(controlId in state.verdicts)) {
    throw new Error(`control ${controlId} is not part of this mapping`);
  }
  if (state.submitted) {
    return state;
  }
  return { ...state, verdicts: { ...state.verdicts, [controlId]: verdict } };
}

/** Toggle semantics for a two-button UI: clicking the active verdict
 * returns the control to pending. */
export function toggleVerdict(
  state: ReviewState,
  controlId: string,
  verdict: 'accepted' | 'rejected',
): ReviewState {
  const next = state.verdicts[controlId] === verdict ? 'pending' : verdict;
  return setVerdict(state, controlId, next);
}

export function acceptedSet(state: ReviewState): string[] {
  return Object.keys(state.verdicts)
    .filter((id) => state.verdicts[id] === 'accepted')
    .sort();
}

export function rejectedSet(state: ReviewState): string[] {
  return Object.keys(state.verdicts)
    .filter((id) => state.verdicts[id] === 'rejected')
    .sort();
}

export function hasUnsubmittedVerdicts(state: ReviewState): boolean {
  return !state.submitted && (acceptedSet(state).length > 0 || rejectedSet(state).length > 0);
}

/** Submit is enabled only with at least one non-pending verdict. */
export function canSubmit(state: ReviewState): boolean {
  return hasUnsubmittedVerdicts(state);
}

export function buildFeedbackPayload(
  state: ReviewState,
  feedbackId: string,
  author = '',
): FeedbackRequest {
  if (!canSubmit(state)) {
    throw new Error('no verdicts to submit');
  }
  return {
    regulation_id: state.mapping.regulation_id,
    feedback_id: feedbackId,
    check_text: state.mapping.query,
    accepted: acceptedSet(state),
    rejected: rejectedSet(state),
    author,
  };
}

export function markSubmitted(state: ReviewState): ReviewState {
  return { ...state, submitted: true };
}

/** Blocks duplicate submissions client-side by feedback id. */
export class SubmissionGuard {
  private readonly seen = new Set<string>();

  /** Returns false when the id was already submitted. */
  register(feedbackId: string): boolean {
    if (this.seen.has(feedbackId)) {
      return false;
    }
    this.seen.add(feedbackId);
    return true;
  }

  /** A rejected submission frees its id for a retry. */
  release(feedbackId: string): void {
    this.seen.delete(feedbackId);
  }
}

let counter = 0;

/** Unique-enough feedback id for one browser session. */
export function nextFeedbackId(prefix = 'ui'): string {
  counter += 1;
  return `${prefix}-${Date.now().toString(36)}-${counter}`;
}
