export { computeAdvantages, ZERO_VARIANCE_EPS } from "./advantages.js";
export { ADVANTAGE_TOLERANCE, loadAndValidate, trainerTriples } from "./loader.js";
export type { LoadOptions } from "./loader.js";
export {
  AdvantageMismatch,
  CONDITIONING_KINDS,
  EXPECTED_SCHEMA_VERSION,
  GroupIntegrity,
  SchemaMismatch,
} from "./types.js";
export type {
  BatchManifest,
  BatchRow,
  BatchStats,
  ConditioningKind,
  TrainerGroup,
  ValidatedBatch,
} from "./types.js";
