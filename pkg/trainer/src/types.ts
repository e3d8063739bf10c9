/** Row and manifest shapes for exported rollout batches, plus error classes. */

export const EXPECTED_SCHEMA_VERSION = 1;

export const CONDITIONING_KINDS = ["summary", "trace", "summary_context"] as const;
export type ConditioningKind = (typeof CONDITIONING_KINDS)[number];

export interface BatchRow {
  problem_id: string;
  source_turn_t: number;
  conditioning_kind: ConditioningKind;
  conditioning_text: string;
  rollout_text: string;
  rollout_tokens: number;
  reward: number;
  group_id: string;
  advantage: number;
  lineage_depth: number;
  seed: number;
}

export interface BatchManifest {
  schema_version: number;
  mode: string;
  t_train: number;
  n_summ: number;
  k_group: number;
  epoch: number;
  seed: number;
  rows: number;
  groups: number;
  [key: string]: unknown;
}

export interface BatchStats {
  rowCount: number;
  groupCount: number;
  zeroVarianceGroupCount: number;
}

/** One GRPO group, ready for a trainer: shared conditioning, K rollouts. */
export interface TrainerGroup {
  groupId: string;
  problemId: string;
  conditioningKind: ConditioningKind;
  conditioningText: string;
  rollouts: { rolloutText: string; reward: number; advantage: number }[];
}

export interface ValidatedBatch {
  groups: TrainerGroup[];
  manifest: BatchManifest | null;
  manifestHash: string | null;
  stats: BatchStats;
}

export class SchemaMismatch extends Error {
  constructor(
    public readonly line: number,
    detail: string,
  ) {
    super(`schema mismatch at line ${line}: ${detail}`);
    this.name = "SchemaMismatch";
  }
}

export class GroupIntegrity extends Error {
  constructor(
    public readonly groupId: string,
    detail: string,
  ) {
    super(`group integrity violation in ${groupId}: ${detail}`);
    this.name = "GroupIntegrity";
  }
}

export class AdvantageMismatch extends Error {
  constructor(
    public readonly groupId: string,
    detail: string,
  ) {
    super(`advantage mismatch in ${groupId}: ${detail}`);
    this.name = "AdvantageMismatch";
  }
}
