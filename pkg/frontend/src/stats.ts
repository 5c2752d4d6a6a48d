// Per-iteration statistics panel: plain data plus bar-row markup strings.

import { StatsReply } from "./protocol.js";

export interface StatsRow {
  iteration: number;
  successRate: number;
  interventionRate: number;
}

export class StatsPanel {
  private rows: StatsRow[] = [];

  update(stats: StatsReply): void {
    const row: StatsRow = {
      iteration: stats.iteration,
      successRate: stats.success_rate,
      interventionRate: stats.intervention_rate,
    };
    const existing = this.rows.findIndex((r) => r.iteration === row.iteration);
    if (existing >= 0) this.rows[existing] = row;
    else this.rows.push(row);
  }

  latest(): StatsRow | undefined {
    return this.rows[this.rows.length - 1];
  }

  all(): StatsRow[] {
    return [...this.rows];
  }

  // One bar row per iteration, e.g. "it 3  success ########--  80%  interv 12%"
  barRows(width = 10): string[] {
    return this.rows.map((r) => {
      const filled = Math.round(r.successRate * width);
      const bar = "#".repeat(filled) + "-".repeat(width - filled);
      const pct = Math.round(r.successRate * 100);
      const ivr = Math.round(r.interventionRate * 100);
      return `it ${r.iteration}  success ${bar} ${pct}%  interv ${ivr}%`;
    });
  }
}
