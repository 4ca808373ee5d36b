/** Wire types shared with the gateway. */

export type Layout = "graph" | "timeline" | "distribution";
export type StrategyKind = "none" | "partial" | "full";
export type Attribute = "color" | "shape" | "size" | "proximity" | "thickness";
export type Difficulty = "low" | "high";

export interface AdaptationOperation {
  target: string;
  property: string;
  value: string | number | boolean;
}

export interface AdaptationConfig {
  config_id: string;
  session_id: string;
  layout: Layout;
  strategy: { kind: StrategyKind; attribute?: Attribute };
  operations: AdaptationOperation[];
  issued_at_ms: number;
  epoch_index?: number;
}

export interface Envelope<P = unknown> {
  topic: string;
  seq: number;
  timestamp_ms: number;
  session_id: string;
  payload: P;
}

export type BehaviorEvent =
  | { event: "layout_switch"; layout: Layout; session_id?: string }
  | { event: "question_shown"; question_id: string; difficulty: Difficulty; session_id?: string }
  | {
      event: "answer_submitted";
      question_id: string;
      correct: boolean;
      reaction_time_ms: number;
      session_id?: string;
    };

export interface Party {
  id: string;
  name: string;
  arrests: number;
  gender: "m" | "f";
  birthplace: string;
  incarcerated: boolean;
  clique: boolean;
}

export interface CallRecord {
  from: string;
  to: string;
  /** minutes since the start of the investigation window */
  t_min: number;
  duration_s: number;
}
