import { ApiError, ServiceDownError } from "./client.js";

export const GROUP_KEY_HINT =
  "This column was not a compression key when the session was created. " +
  "Re-create the session with it listed in compression_keys, then retry.";

/** Clear any banner currently shown. */
export function clearBanner(container: HTMLElement): void {
  container.textContent = "";
}

/**
 * Surface a failure to the analyst.  Group-key conflicts (HTTP 409) show
 * the service's message verbatim plus the remediation hint; an unreachable
 * service gets a retry button.
 */
export function renderErrorBanner(
  container: HTMLElement,
  err: unknown,
  onRetry?: () => void,
): void {
  container.textContent = "";
  const banner = document.createElement("div");
  banner.className = "banner";

  if (err instanceof ServiceDownError) {
    banner.classList.add("banner-down");
    const text = document.createElement("span");
    text.className = "banner-message";
    text.textContent = err.message;
    banner.appendChild(text);
    const retry = document.createElement("button");
    retry.className = "retry";
    retry.textContent = "Retry";
    if (onRetry) retry.addEventListener("click", onRetry);
    banner.appendChild(retry);
  } else if (err instanceof ApiError) {
    banner.classList.add("banner-error");
    banner.dataset.status = String(err.status);
    const text = document.createElement("span");
    text.className = "banner-message";
    text.textContent = err.body ? err.body.message : err.message;
    banner.appendChild(text);
    if (err.status === 409) {
      const hint = document.createElement("span");
      hint.className = "banner-hint";
      hint.textContent = GROUP_KEY_HINT;
      banner.appendChild(hint);
    }
  } else {
    banner.classList.add("banner-error");
    const text = document.createElement("span");
    text.className = "banner-message";
    text.textContent = err instanceof Error ? err.message : String(err);
    banner.appendChild(text);
  }

  container.appendChild(banner);
}
