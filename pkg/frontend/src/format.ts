// Text rendering of service values.  Numbers are shown with String(), the
// shortest decimal that round-trips to the identical IEEE double, so what
// the analyst reads IS the service's value — no rounding layer that could
// hide a discrepancy, and tests can compare rendered text to response
// fields exactly.

export function exact(value: number | string | null): string {
  if (value === null) return "–";
  return String(value);
}

/** Joined display label for a CATE cell's group key ("overall" for the ATE). */
export function groupLabel(groupKey: (string | number)[]): string {
  if (groupKey.length === 0) return "overall";
  return groupKey.map(String).join(" / ");
}
