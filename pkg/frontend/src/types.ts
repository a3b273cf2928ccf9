// Shapes mirroring the service's response models. Every number the UI shows
// comes from one of these fields; the client never derives acceptance itself.

export type BucketName = 'one' | 'two' | 'three' | 'four_plus';

export type BucketProgress = {
  target: number;
  accepted: number;
};

export type SessionSummary = {
  session_id: string;
  status: 'collecting' | 'scoring' | 'complete';
  round: number;
  pending_count: number;
  buckets: Record<BucketName, BucketProgress>;
};

export type Candidate = {
  id: string;
  task: string;
  num_goals: number;
  map_id: string;
  goals: [number, number][];
  bucket: BucketName;
  round: number;
  provenance: string;
  score: number | null;
};

export type Job = {
  state: 'queued' | 'running' | 'done' | 'failed';
  dropped_count: number | null;
  error: string | null;
};

export type LandmarkInfo = {
  name: string;
  x: number;
  y: number;
  attributes: Record<string, string>;
};

export type WorldInfo = {
  id: string;
  resolution_m: number;
  origin: [number, number];
  n_rows: number;
  n_cols: number;
  landmarks: LandmarkInfo[];
};

export type ExportResult = {
  train_path: string;
  test_path: string;
};

export const BUCKET_ORDER: BucketName[] = ['one', 'two', 'three', 'four_plus'];

export const BUCKET_LABELS: Record<BucketName, string> = {
  one: '1 goal',
  two: '2 goals',
  three: '3 goals',
  four_plus: '4+ goals',
};
