#!/usr/bin/env node
/** validate-batch <batch.jsonl> [manifest.json] — validate and print stats. */

import { loadAndValidate } from "./loader.js";

const [batchPath, manifestPath] = process.argv.slice(2);
if (!batchPath) {
  console.error("usage: validate-batch <batch.jsonl> [manifest.json]");
  process.exit(2);
}

try {
  const batch = loadAndValidate(batchPath, manifestPath ? { manifestPath } : {});
  console.log(
    JSON.stringify(
      {
        ok: true,
        rows: batch.stats.rowCount,
        groups: batch.stats.groupCount,
        zero_variance_groups: batch.stats.zeroVarianceGroupCount,
        manifest_hash: batch.manifestHash,
      },
      null,
      2,
    ),
  );
} catch (err) {
  const name = err instanceof Error ? err.name : "Error";
  const message = err instanceof Error ? err.message : String(err);
  console.error(JSON.stringify({ ok: false, error: name, message }));
  process.exit(1);
}
