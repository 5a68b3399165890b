// JSON contract with the annotation service. Field names mirror the
// server payloads exactly; change them only together with the backend.

export type Candidate = {
  start: number;
  end: number;
  pos: string;
};

export type SchemaInfo = {
  event_types: string[]; // index 0 is always NA
  roles: string[];
};

export type AnnotationTask = {
  id: string;
  tokens: string[];
  candidates: Candidate[];
  schema: SchemaInfo;
  importance: number;
  round: number;
};

export type F1Report = {
  trigger_p: number;
  trigger_r: number;
  trigger_f1: number;
  argument_p: number;
  argument_r: number;
  argument_f1: number;
};

export type Status = {
  round: number;
  labeled: number;
  unlabeled: number;
  pending: number;
  completed: number;
  completed_total: number;
  training: boolean;
  model_version: number;
  strategy: string;
  query_size: number;
  f1: F1Report | null;
};

export type LabelSubmission = {
  id: string;
  trigger_labels: number[];
  argument_labels: number[][];
};

export type SubmitAck = {
  ok: boolean;
  completed: number;
  round_advanced: boolean;
};
