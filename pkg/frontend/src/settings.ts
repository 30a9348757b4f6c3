/** Persistence for the strategy / model / dialect pickers.
 *
 * Stored settings are advisory: whatever the live /health report offers
 * wins, and stale stored values silently fall back to the first offered
 * option so a config change on the server never wedges the UI.
 */

import { DIALECTS, type Dialect, type HealthReport } from "./api.js";

export interface Settings {
  strategy: string;
  model: string;
  dialect: Dialect;
}

export const STORAGE_KEY = "webchat.settings";

export function loadStoredSettings(storage: Storage): Partial<Settings> {
  let raw: string | null;
  try {
    raw = storage.getItem(STORAGE_KEY);
  } catch {
    return {};
  }
  if (raw === null) {
    return {};
  }
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch {
    return {};
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    return {};
  }
  const record = parsed as Record<string, unknown>;
  const settings: Partial<Settings> = {};
  if (typeof record.strategy === "string") {
    settings.strategy = record.strategy;
  }
  if (typeof record.model === "string") {
    settings.model = record.model;
  }
  if (record.dialect === "REST" || record.dialect === "GRAPHQL") {
    settings.dialect = record.dialect;
  }
  return settings;
}

export function saveSettings(storage: Storage, settings: Settings): void {
  try {
    storage.setItem(STORAGE_KEY, JSON.stringify(settings));
  } catch {
    // Private browsing or a full quota must not break the chat itself.
  }
}

function pick(stored: string | undefined, offered: string[]): string {
  if (stored !== undefined && offered.includes(stored)) {
    return stored;
  }
  return offered[0] ?? "";
}

/** Merge stored preferences with what the service actually offers. */
export function reconcileSettings(
  stored: Partial<Settings>,
  health: HealthReport,
): Settings {
  const dialect =
    stored.dialect !== undefined && DIALECTS.includes(stored.dialect)
      ? stored.dialect
      : DIALECTS[0]!;
  return {
    strategy: pick(stored.strategy, health.strategies),
    model: pick(stored.model, health.models),
    dialect,
  };
}
