/** Wire types for the /v1 JSON API. */

export type Provenance = 'search' | 'cnn' | 'both';

export interface MappingEntry {
  control_id: string;
  confidence: number;
  provenance: Provenance;
}

export interface MappingResult {
  query: string;
  regulation_id: string;
  threshold: number;
  results: MappingEntry[];
  model_generation: number;
  index_generation: number;
}

export interface FeedbackRequest {
  regulation_id: string;
  feedback_id: string;
  check_text: string;
  accepted: string[];
  rejected: string[];
  author?: string;
}

export interface FeedbackAck {
  accepted: boolean;
  feedback_id: string;
  pending: number;
  total_feedback: number;
  model_generation: number;
  retrain_scheduled: boolean;
}

export interface RegulationStatus {
  controls: number;
  training_checks: number;
  index_generation: number;
  model_generation: number;
  pending_feedback: number;
  total_feedback: number;
}

export interface SystemStatus {
  regulations_loaded: number;
  index_generation: number;
  model_generation: number;
  pending_feedback: number;
  total_feedback: number;
  uptime_seconds: number;
  regulations: Record<string, RegulationStatus>;
}

export interface FamilyCoverage {
  covered: number;
  total: number;
}

export interface CoverageReport {
  regulation_id: string;
  covered: string[];
  gaps: string[];
  coverage_ratio: number;
  per_family: Record<string, FamilyCoverage>;
  generated_at: string;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  details?: Record<string, unknown>;
}
