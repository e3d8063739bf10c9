/**
 * Batch loading and validation. The adapter is a pure file consumer: it never
 * talks to any backend. Every exported row is schema-checked with its line
 * number, groups are checked for size and shared conditioning, and stored
 * advantages are re-derived from rewards and compared to 1e-6.
 */

import { createHash } from "node:crypto";
import { existsSync, readFileSync } from "node:fs";

import { computeAdvantages, ZERO_VARIANCE_EPS } from "./advantages.js";
import {
  AdvantageMismatch,
  BatchManifest,
  BatchRow,
  CONDITIONING_KINDS,
  EXPECTED_SCHEMA_VERSION,
  GroupIntegrity,
  SchemaMismatch,
  TrainerGroup,
  ValidatedBatch,
} from "./types.js";

export const ADVANTAGE_TOLERANCE = 1e-6;

const ROW_FIELDS: [keyof BatchRow, "string" | "number"][] = [
  ["problem_id", "string"],
  ["source_turn_t", "number"],
  ["conditioning_kind", "string"],
  ["conditioning_text", "string"],
  ["rollout_text", "string"],
  ["rollout_tokens", "number"],
  ["reward", "number"],
  ["group_id", "string"],
  ["advantage", "number"],
  ["lineage_depth", "number"],
  ["seed", "number"],
];

function parseRow(line: string, lineNumber: number): BatchRow {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch (err) {
    throw new SchemaMismatch(lineNumber, `unparseable JSON (${String(err)})`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new SchemaMismatch(lineNumber, "row is not an object");
  }
  const record = obj as Record<string, unknown>;
  for (const [field, kind] of ROW_FIELDS) {
    const value = record[field];
    if (value === undefined || value === null) {
      throw new SchemaMismatch(lineNumber, `missing field ${field}`);
    }
    if (typeof value !== kind) {
      throw new SchemaMismatch(lineNumber, `field ${field} must be ${kind}`);
    }
  }
  const row = record as unknown as BatchRow;
  if (!CONDITIONING_KINDS.includes(row.conditioning_kind)) {
    throw new SchemaMismatch(lineNumber, `unknown conditioning_kind ${row.conditioning_kind}`);
  }
  if (row.reward < 0 || row.reward > 1) {
    throw new SchemaMismatch(lineNumber, `reward out of [0, 1]: ${row.reward}`);
  }
  if (row.source_turn_t < 1 || !Number.isInteger(row.source_turn_t)) {
    throw new SchemaMismatch(lineNumber, `source_turn_t must be a positive integer`);
  }
  if (row.rollout_tokens < 0 || !Number.isInteger(row.rollout_tokens)) {
    throw new SchemaMismatch(lineNumber, `rollout_tokens must be a nonnegative integer`);
  }
  return row;
}

function defaultManifestPath(batchPath: string): string {
  return batchPath.replace(/\.jsonl$/, ".manifest.json");
}

function loadManifest(path: string): { manifest: BatchManifest; hash: string } {
  const raw = readFileSync(path, "utf-8");
  const manifest = JSON.parse(raw) as BatchManifest;
  if (manifest.schema_version !== EXPECTED_SCHEMA_VERSION) {
    throw new SchemaMismatch(
      0,
      `manifest schema_version ${manifest.schema_version}, expected ${EXPECTED_SCHEMA_VERSION}`,
    );
  }
  const hash = createHash("sha256").update(raw).digest("hex");
  return { manifest, hash };
}

export interface LoadOptions {
  manifestPath?: string;
  /** Expected rows per group; defaults to the manifest's k_group. */
  groupSize?: number;
}

export function loadAndValidate(batchPath: string, options: LoadOptions = {}): ValidatedBatch {
  let manifest: BatchManifest | null = null;
  let manifestHash: string | null = null;
  const manifestPath = options.manifestPath ?? defaultManifestPath(batchPath);
  if (existsSync(manifestPath)) {
    ({ manifest, hash: manifestHash } = loadManifest(manifestPath));
  }

  const rows: BatchRow[] = [];
  const lines = readFileSync(batchPath, "utf-8").split("\n");
  lines.forEach((line, index) => {
    if (line.trim().length === 0) return;
    rows.push(parseRow(line, index + 1));
  });

  const byGroup = new Map<string, BatchRow[]>();
  for (const row of rows) {
    const bucket = byGroup.get(row.group_id);
    if (bucket) {
      bucket.push(row);
    } else {
      byGroup.set(row.group_id, [row]);
    }
  }

  const expectedSize = options.groupSize ?? manifest?.k_group;
  const groups: TrainerGroup[] = [];
  let zeroVariance = 0;

  for (const [groupId, members] of byGroup) {
    if (expectedSize !== undefined && members.length !== expectedSize) {
      throw new GroupIntegrity(groupId, `has ${members.length} rows, expected ${expectedSize}`);
    }
    if (members.length < 2) {
      throw new GroupIntegrity(groupId, `has ${members.length} rows, groups need at least 2`);
    }
    const first = members[0];
    for (const row of members) {
      if (row.problem_id !== first.problem_id || row.conditioning_text !== first.conditioning_text) {
        throw new GroupIntegrity(groupId, "rows disagree on (problem_id, conditioning_text)");
      }
    }

    const rewards = members.map((row) => row.reward);
    const derived = computeAdvantages(rewards);
    members.forEach((row, i) => {
      if (Math.abs(row.advantage - derived[i]) > ADVANTAGE_TOLERANCE) {
        throw new AdvantageMismatch(
          groupId,
          `stored ${row.advantage}, recomputed ${derived[i]} (row ${i})`,
        );
      }
    });

    const mean = rewards.reduce((acc, r) => acc + r, 0) / rewards.length;
    const variance = rewards.reduce((acc, r) => acc + (r - mean) ** 2, 0) / rewards.length;
    if (Math.sqrt(variance) < ZERO_VARIANCE_EPS) {
      zeroVariance += 1;
    }

    groups.push({
      groupId,
      problemId: first.problem_id,
      conditioningKind: first.conditioning_kind,
      conditioningText: first.conditioning_text,
      rollouts: members.map((row) => ({
        rolloutText: row.rollout_text,
        reward: row.reward,
        advantage: row.advantage,
      })),
    });
  }

  if (manifest) {
    if (manifest.rows !== rows.length) {
      throw new GroupIntegrity("*", `manifest says ${manifest.rows} rows, file has ${rows.length}`);
    }
    if (manifest.groups !== groups.length) {
      throw new GroupIntegrity(
        "*",
        `manifest says ${manifest.groups} groups, file has ${groups.length}`,
      );
    }
  }

  return {
    groups,
    manifest,
    manifestHash,
    stats: {
      rowCount: rows.length,
      groupCount: groups.length,
      zeroVarianceGroupCount: zeroVariance,
    },
  };
}

/** Flatten a validated batch into (conditioning, rollout, advantage) triples. */
export function* trainerTriples(
  batch: ValidatedBatch,
): Generator<[string, string, number]> {
  for (const group of batch.groups) {
    for (const rollout of group.rollouts) {
      yield [group.conditioningText, rollout.rolloutText, rollout.advantage];
    }
  }
}
