/** Dashboard shaping for coverage reports: numbers shown must equal the
 * server's to the displayed precision (one decimal for the headline
 * ratio, raw integers for the per-family rollup). */

import type { CoverageReport } from './types';

export interface FamilyBar {
  family: string;
  covered: number;
  total: number;
  ratio: number;
  widthPercent: number;
}

export function familyBars(report: CoverageReport): FamilyBar[] {
  return Object.entries(report.per_family)
    .map(([family, counts]) => {
      const ratio = counts.total > 0 ? counts.covered / counts.total : 0;
      return {
        family,
        covered: counts.covered,
        total: counts.total,
        ratio,
        widthPercent: Math.round(ratio * 100),
      };
    })
    .sort((a, b) => a.family.localeCompare(b.family));
}

/** Headline ratio at the displayed precision (one decimal place). */
export function formatRatio(ratio: number): string {
  return `${(ratio * 100).toFixed(1)}%`;
}

export function gapList(report: CoverageReport): string[] {
  return [...report.gaps].sort();
}

export function coverageHeadline(report: CoverageReport): string {
  const total = report.covered.length + report.gaps.length;
  return `${report.covered.length}/${total} controls covered (${formatRatio(report.coverage_ratio)})`;
}
