// Targets are reported exactly as the service computed them: a 40-site study
// with a 16% category has a target of 6.4, displayed as "6.4", never "6".

export function formatTarget(target: number): string {
  return String(target);
}

export function formatShare(share: number): string {
  return `${(share * 100).toFixed(1)}%`;
}

export function fillPercent(tally: number, limit: number): number {
  if (limit <= 0) {
    return tally > 0 ? 100 : 0;
  }
  return Math.min(100, Math.round((tally / limit) * 100));
}

export function formatTime(iso: string): string {
  const parsed = new Date(iso);
  return Number.isNaN(parsed.getTime()) ? iso : parsed.toLocaleTimeString();
}
