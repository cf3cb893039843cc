/**
 * Wrap an async function so that only the most recently started call may
 * deliver a result; calls superseded by a newer one resolve to null even
 * if their response arrives later.  This keeps a fast-clicking analyst's
 * screen consistent with the last control change (latest wins).
 */
export function latestWins<A extends unknown[], R>(
  run: (...args: A) => Promise<R>,
): (...args: A) => Promise<R | null> {
  let seq = 0;
  return async (...args: A): Promise<R | null> => {
    const ticket = ++seq;
    const result = await run(...args);
    return ticket === seq ? result : null;
  };
}
