/** Status polling (2 s cadence) and retrain banner detection.
 *
 * There is no push channel in the service's scope, so the console polls
 * /v1/status and announces "model retrained, generation n" whenever the
 * generation for the selected regulation moves up.
 */

import type { SystemStatus } from './types';

export const POLL_INTERVAL_MS = 2000;

export interface RetrainEvent {
  retrained: boolean;
  generation: number;
  message: string;
}

export function detectRetrain(
  previous: SystemStatus | null,
  next: SystemStatus,
  regulationId: string,
): RetrainEvent {
  const nextGen = next.regulations[regulationId]?.model_generation ?? 0;
  const prevGen = previous?.regulations[regulationId]?.model_generation ?? nextGen;
  const retrained = nextGen > prevGen;
  return {
    retrained,
    generation: nextGen,
    message: retrained ? `model retrained, generation ${nextGen}` : '',
  };
}

export function pendingSummary(status: SystemStatus, regulationId: string, y: number | null): string {
  const reg = status.regulations[regulationId];
  if (!reg) {
    return '';
  }
  const until = y === null ? '' : ` (retrains every ${y})`;
  return `${reg.pending_feedback} feedback pending${until}, model generation ${reg.model_generation}`;
}

export class StatusPoller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private last: SystemStatus | null = null;

  constructor(
    private readonly fetchStatus: () => Promise<SystemStatus>,
    private readonly onUpdate: (status: SystemStatus, previous: SystemStatus | null) => void,
    private readonly intervalMs: number = POLL_INTERVAL_MS,
  ) {}

  start(): void {
    if (this.timer !== null) {
      return;
    }
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  private async tick(): Promise<void> {
    try {
      const status = await this.fetchStatus();
      this.onUpdate(status, this.last);
      this.last = status;
    } catch {
      // transient poll failures are silent; the next tick retries
    }
  }
}
