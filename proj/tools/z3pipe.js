// SPDX-License-Identifier: Apache-2.0
//
// Minimal SMT-LIB2 pipe around the z3 WASM build (npm package `z3-solver`).
// Reads SMT-LIB2 from stdin; each (check-sat) prints one verdict line on
// stdout; (reset) clears the accumulated script. Intended as a stand-in for
// a native `z3 -in` when no solver binary is installed.
(async () => {
  const { init } = require('z3-solver');
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);

  let pending = '';
  const queue = [];
  let wake = null;
  let ended = false;
  process.stdin.on('data', (chunk) => {
    pending += chunk.toString();
    let nl;
    while ((nl = pending.indexOf('\n')) >= 0) {
      queue.push(pending.slice(0, nl));
      pending = pending.slice(nl + 1);
    }
    if (wake) { const w = wake; wake = null; w(); }
  });
  process.stdin.on('end', () => {
    if (pending.length) queue.push(pending);
    ended = true;
    if (wake) { const w = wake; wake = null; w(); }
  });

  async function nextLine() {
    while (queue.length === 0) {
      if (ended) return null;
      await new Promise((resolve) => { wake = resolve; });
    }
    return queue.shift();
  }

  let buf = [];
  for (;;) {
    const line = await nextLine();
    if (line === null) break;
    const t = line.trim();
    if (t === '(reset)') { buf = []; continue; }
    buf.push(line);
    if (t.endsWith('(check-sat)')) {
      let verdict = 'unknown';
      try {
        // eval_smtlib2_string keeps solver state across calls; an explicit
        // reset isolates the queries from each other.
        const out = await Z3.eval_smtlib2_string(ctx, '(reset)\n' + buf.join('\n'));
        for (const w of out.trim().split(/\s+/))
          if (w === 'sat' || w === 'unsat' || w === 'unknown') verdict = w;
      } catch (e) {
        verdict = 'unknown';
      }
      process.stdout.write(verdict + '\n');
    }
  }
  process.exit(0);
})().catch((e) => { console.error(e); process.exit(1); });
