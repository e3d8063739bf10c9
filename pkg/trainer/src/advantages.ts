/**
 * Independent re-implementation of group-relative advantage standardization.
 * Deliberately written from the definition (population mean/std, all-equal
 * groups map to zeros) rather than shared with the engine, so the two sides
 * cross-check each other.
 */

export const ZERO_VARIANCE_EPS = 1e-8;

export function computeAdvantages(rewards: number[]): number[] {
  if (rewards.length < 2) {
    throw new RangeError(`group needs at least 2 rewards, got ${rewards.length}`);
  }
  for (const r of rewards) {
    if (!Number.isFinite(r)) {
      throw new RangeError("rewards must be finite");
    }
  }
  const k = rewards.length;
  const mean = rewards.reduce((acc, r) => acc + r, 0) / k;
  const variance = rewards.reduce((acc, r) => acc + (r - mean) ** 2, 0) / k;
  const std = Math.sqrt(variance);
  if (std < ZERO_VARIANCE_EPS) {
    return rewards.map(() => 0);
  }
  return rewards.map((r) => (r - mean) / std);
}
