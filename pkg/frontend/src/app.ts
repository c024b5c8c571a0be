/** DOM wiring for the review console: query view with threshold slider,
 * verdict submission, retrain banner, and the coverage dashboard. UI
 * state is a pure function of server responses plus local verdicts;
 * reloading loses only unsubmitted verdicts, which navigation warns
 * about. */

import { ApiClient, ApiError } from './api';
import { canFilterLocally, confidenceBarWidth, visibleEntries } from './filter';
import {
  buildFeedbackPayload,
  canSubmit,
  hasUnsubmittedVerdicts,
  markSubmitted,
  newReview,
  nextFeedbackId,
  ReviewState,
  SubmissionGuard,
  toggleVerdict,
} from './review';
import { coverageHeadline, familyBars, formatRatio, gapList } from './coverage';
import { detectRetrain, pendingSummary, StatusPoller } from './status';
import type { MappingEntry, SystemStatus } from './types';

const api = new ApiClient();
const guard = new SubmissionGuard();

let review: ReviewState | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const queryText = () => el<HTMLTextAreaElement>('query-text');
const regulationSelect = () => el<HTMLSelectElement>('regulation');
const slider = () => el<HTMLInputElement>('threshold');
const sliderValue = () => el<HTMLSpanElement>('threshold-value');
const resultsRoot = () => el<HTMLDivElement>('results');
const errorBox = () => el<HTMLDivElement>('error');
const banner = () => el<HTMLDivElement>('banner');
const statusLine = () => el<HTMLDivElement>('status-line');
const submitButton = () => el<HTMLButtonElement>('submit-verdicts');
const coverageRoot = () => el<HTMLDivElement>('coverage');

function showError(message: string): void {
  errorBox().textContent = message;
  errorBox().hidden = message === '';
}

function renderResults(): void {
  const root = resultsRoot();
  root.replaceChildren();
  if (!review) {
    return;
  }
  const threshold = Number(slider().value);
  let entries: MappingEntry[];
  if (canFilterLocally(review.mapping, threshold)) {
    entries = visibleEntries(review.mapping, threshold);
  } else {
    entries = review.mapping.results; // a re-query is already in flight
  }
  for (const entry of entries) {
    const card = document.createElement('div');
    card.className = 'card';

    const title = document.createElement('div');
    title.className = 'card-title';
    title.textContent = entry.control_id;
    const badge = document.createElement('span');
    badge.className = `badge badge-${entry.provenance}`;
    badge.textContent = entry.provenance;
    title.appendChild(badge);

    const bar = document.createElement('div');
    bar.className = 'bar';
    const fill = document.createElement('div');
    fill.className = 'bar-fill';
    fill.style.width = `${confidenceBarWidth(entry.confidence)}%`;
    bar.appendChild(fill);
    const confidence = document.createElement('span');
    confidence.className = 'confidence';
    confidence.textContent = entry.confidence.toFixed(3);

    const actions = document.createElement('div');
    actions.className = 'actions';
    for (const verdict of ['accepted', 'rejected'] as const) {
      const button = document.createElement('button');
      button.textContent = verdict === 'accepted' ? 'accept' : 'reject';
      const active = review.verdicts[entry.control_id] === verdict;
      button.className = active ? `verdict ${verdict}` : 'verdict';
      button.disabled = review.submitted;
      button.onclick = () => {
        if (review) {
          review = toggleVerdict(review, entry.control_id, verdict);
          renderResults();
        }
      };
      actions.appendChild(button);
    }

    card.append(title, bar, confidence, actions);
    root.appendChild(card);
  }
  submitButton().disabled = !review || !canSubmit(review);
}

async function runQuery(): Promise<void> {
  showError('');
  const regulationId = regulationSelect().value;
  const threshold = Number(slider().value);
  try {
    const mapping = await api.map(queryText().value, regulationId, threshold);
    review = newReview(mapping);
    renderResults();
  } catch (err) {
    if (err instanceof ApiError) {
      showError(`${err.message} — ${err.retryGuidance}`);
    } else {
      showError(String(err));
    }
  }
}

function onSliderMove(): void {
  sliderValue().textContent = Number(slider().value).toFixed(2);
  if (!review) {
    return;
  }
  if (canFilterLocally(review.mapping, Number(slider().value))) {
    renderResults(); // monotonicity makes local narrowing exact
  } else {
    void runQuery(); // widening below the queried threshold needs the server
  }
}

async function submitVerdicts(): Promise<void> {
  if (!review || !canSubmit(review)) {
    return;
  }
  const feedbackId = nextFeedbackId();
  if (!guard.register(feedbackId)) {
    showError('duplicate submission blocked');
    return;
  }
  const payload = buildFeedbackPayload(review, feedbackId);
  review = markSubmitted(review); // optimistic; confirmed or rolled back below
  renderResults();
  try {
    const ack = await api.submitFeedback(payload);
    statusLine().textContent = `recorded ${ack.feedback_id}: ${ack.pending} pending, generation ${ack.model_generation}`;
    await renderCoverage();
  } catch (err) {
    guard.release(feedbackId);
    review = { ...review, submitted: false };
    renderResults();
    if (err instanceof ApiError) {
      showError(`${err.message} — ${err.retryGuidance}`);
    } else {
      showError(String(err));
    }
  }
}

async function renderCoverage(): Promise<void> {
  const regulationId = regulationSelect().value;
  if (!regulationId) {
    return;
  }
  const report = await api.coverage(regulationId);
  const root = coverageRoot();
  root.replaceChildren();

  const headline = document.createElement('div');
  headline.className = 'coverage-headline';
  headline.textContent = coverageHeadline(report);
  root.appendChild(headline);

  for (const bar of familyBars(report)) {
    const row = document.createElement('div');
    row.className = 'family-row';
    const label = document.createElement('span');
    label.textContent = `${bar.family} ${bar.covered}/${bar.total} (${formatRatio(bar.ratio)})`;
    const track = document.createElement('div');
    track.className = 'bar';
    const fill = document.createElement('div');
    fill.className = 'bar-fill covered';
    fill.style.width = `${bar.widthPercent}%`;
    track.appendChild(fill);
    row.append(label, track);
    root.appendChild(row);
  }

  const gaps = document.createElement('div');
  gaps.className = 'gaps';
  const shown = gapList(report).slice(0, 40);
  gaps.textContent = shown.length
    ? `gaps: ${shown.join(', ')}${report.gaps.length > shown.length ? ', …' : ''}`
    : 'no gaps';
  root.appendChild(gaps);
}

function onStatus(status: SystemStatus, previous: SystemStatus | null): void {
  const regulationId = regulationSelect().value;
  const select = regulationSelect();
  const known = new Set(Array.from(select.options).map((o) => o.value));
  for (const reg of Object.keys(status.regulations).sort()) {
    if (!known.has(reg)) {
      const option = document.createElement('option');
      option.value = reg;
      option.textContent = reg;
      select.appendChild(option);
    }
  }
  if (!regulationId && select.options.length > 0) {
    select.value = select.options[0].value;
    void renderCoverage();
  }
  statusLine().textContent = pendingSummary(status, select.value, null);
  const event = detectRetrain(previous, status, select.value);
  if (event.retrained) {
    banner().textContent = event.message;
    banner().hidden = false;
    setTimeout(() => {
      banner().hidden = true;
    }, 8000);
    void renderCoverage();
  }
}

export function start(): void {
  slider().oninput = onSliderMove;
  el<HTMLButtonElement>('run-query').onclick = () => void runQuery();
  submitButton().onclick = () => void submitVerdicts();
  regulationSelect().onchange = () => void renderCoverage();
  window.addEventListener('beforeunload', (event) => {
    if (review && hasUnsubmittedVerdicts(review)) {
      event.preventDefault();
    }
  });
  new StatusPoller(() => api.status(), onStatus).start();
}

if (typeof document !== 'undefined' && document.getElementById('run-query')) {
  start();
}
