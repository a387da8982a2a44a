// View model for the shares panel.  The displayed numbers are the service's
// pre-formatted strings, verbatim: the panel must never recompute or
// re-round what /report said.

import type { ReportPayload } from "./types.js";

export const PLACEHOLDER = "—"; // em-dash for models without labels yet

export interface ReportRow {
  model: string;
  fluency: string;
  adequacy: string;
  circularity: string;
  labeled: number;
  total: number;
}

export function reportRows(report: ReportPayload): ReportRow[] {
  return Object.keys(report.models)
    .sort()
    .map((tag) => {
      const shares = report.models[tag]!;
      return {
        model: tag,
        fluency: shares.formatted.fluency ?? PLACEHOLDER,
        adequacy: shares.formatted.adequacy ?? PLACEHOLDER,
        circularity: shares.formatted.circularity ?? PLACEHOLDER,
        labeled: shares.labeled_tasks,
        total: shares.total_tasks,
      };
    });
}
