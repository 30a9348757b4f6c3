/** The chat page: a settings panel fed by /health, an append-only
 * transcript, and a single-question form that posts to /ask.
 *
 * All state lives in the browser. The service is stateless, so history
 * is whatever this session accumulated, and a failed request only adds
 * an error entry instead of clearing anything.
 */

import {
  ApiClient,
  DIALECTS,
  ServiceError,
  type AskResponse,
  type Dialect,
  type HealthReport,
} from "./api.js";
import {
  loadStoredSettings,
  reconcileSettings,
  saveSettings,
  type Settings,
} from "./settings.js";

export interface ChatTurn {
  question: string;
  timestamp: string;
  /** Exactly one of response and error is set. */
  response: AskResponse | null;
  error: string | null;
}

export interface AppOptions {
  client: ApiClient;
  storage: Storage;
  /** Injectable clock so tests get stable timestamps. */
  now?: () => Date;
}

export interface App {
  readonly root: HTMLElement;
  /** Settles once the initial /health probe finished either way. */
  readonly ready: Promise<void>;
  turns(): readonly ChatTurn[];
  /** Resolves when the most recently started request has finished. */
  settled(): Promise<void>;
}

const SKELETON = `
<div class="webchat">
  <header class="masthead">
    <h1>Land Matrix chat</h1>
    <div class="banner" data-role="banner" hidden>
      <span data-role="banner-message"></span>
      <button type="button" data-role="health-retry">Retry</button>
    </div>
  </header>
  <section class="settings">
    <label>Strategy <select data-role="strategy" disabled></select></label>
    <label>Model <select data-role="model" disabled></select></label>
    <label>Dialect <select data-role="dialect" disabled></select></label>
  </section>
  <ol class="history" data-role="history"></ol>
  <form class="ask" data-role="ask-form">
    <input
      type="text"
      data-role="question"
      placeholder="Ask about land deals, e.g. Which deals in Cambodia are larger than 1000 hectares?"
      autocomplete="off"
    />
    <button type="submit" data-role="submit" disabled>Ask</button>
  </form>
</div>
`;

function element<T extends HTMLElement>(root: HTMLElement, role: string): T {
  const found = root.querySelector(`[data-role="${role}"]`);
  if (found === null) {
    throw new Error(`missing element with role ${role}`);
  }
  return found as T;
}

function make(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

class WebchatApp implements App {
  readonly root: HTMLElement;
  readonly ready: Promise<void>;

  private readonly client: ApiClient;
  private readonly storage: Storage;
  private readonly now: () => Date;

  private readonly banner: HTMLElement;
  private readonly bannerMessage: HTMLElement;
  private readonly retryHealth: HTMLButtonElement;
  private readonly selects: Record<keyof Settings, HTMLSelectElement>;
  private readonly history: HTMLOListElement;
  private readonly form: HTMLFormElement;
  private readonly question: HTMLInputElement;
  private readonly submit: HTMLButtonElement;

  private health: HealthReport | null = null;
  private settings: Settings | null = null;
  private pending = false;
  private readonly log: ChatTurn[] = [];
  private work: Promise<void> = Promise.resolve();

  constructor(root: HTMLElement, options: AppOptions) {
    this.root = root;
    this.client = options.client;
    this.storage = options.storage;
    this.now = options.now ?? (() => new Date());

    root.innerHTML = SKELETON;
    this.banner = element(root, "banner");
    this.bannerMessage = element(root, "banner-message");
    this.retryHealth = element<HTMLButtonElement>(root, "health-retry");
    this.selects = {
      strategy: element<HTMLSelectElement>(root, "strategy"),
      model: element<HTMLSelectElement>(root, "model"),
      dialect: element<HTMLSelectElement>(root, "dialect"),
    };
    this.history = element<HTMLOListElement>(root, "history");
    this.form = element<HTMLFormElement>(root, "ask-form");
    this.question = element<HTMLInputElement>(root, "question");
    this.submit = element<HTMLButtonElement>(root, "submit");

    this.retryHealth.addEventListener("click", () => {
      this.work = this.refreshHealth();
    });
    this.question.addEventListener("input", () => this.updateSubmitState());
    this.form.addEventListener("submit", (event) => {
      event.preventDefault();
      this.onSubmit();
    });
    for (const key of Object.keys(this.selects) as Array<keyof Settings>) {
      this.selects[key].addEventListener("change", () => this.onSettingChange(key));
    }

    this.ready = this.refreshHealth();
    this.work = this.ready;
  }

  turns(): readonly ChatTurn[] {
    return this.log;
  }

  settled(): Promise<void> {
    return this.work;
  }

  private async refreshHealth(): Promise<void> {
    try {
      const health = await this.client.health();
      this.health = health;
      this.settings = reconcileSettings(loadStoredSettings(this.storage), health);
      this.populateSelectors(health, this.settings);
      this.banner.hidden = true;
    } catch (cause) {
      this.health = null;
      this.settings = null;
      const reason = cause instanceof Error ? cause.message : String(cause);
      this.bannerMessage.textContent = `Service unavailable: ${reason}`;
      this.banner.hidden = false;
      for (const select of Object.values(this.selects)) {
        select.disabled = true;
      }
    }
    this.updateSubmitState();
  }

  private populateSelectors(health: HealthReport, settings: Settings): void {
    const offered: Record<keyof Settings, readonly string[]> = {
      strategy: health.strategies,
      model: health.models,
      dialect: DIALECTS,
    };
    for (const key of Object.keys(this.selects) as Array<keyof Settings>) {
      const select = this.selects[key];
      select.replaceChildren();
      for (const value of offered[key]) {
        const option = document.createElement("option");
        option.value = value;
        option.textContent = value;
        select.append(option);
      }
      select.value = settings[key];
      select.disabled = offered[key].length === 0;
    }
  }

  private onSettingChange(key: keyof Settings): void {
    if (this.settings === null) {
      return;
    }
    if (key === "dialect") {
      const value = this.selects.dialect.value;
      this.settings.dialect = DIALECTS.includes(value as Dialect)
        ? (value as Dialect)
        : DIALECTS[0]!;
    } else {
      this.settings[key] = this.selects[key].value;
    }
    saveSettings(this.storage, this.settings);
  }

  private updateSubmitState(): void {
    const blocked =
      this.pending || this.settings === null || this.question.value.trim() === "";
    this.submit.disabled = blocked;
  }

  private onSubmit(): void {
    const text = this.question.value.trim();
    if (this.pending || this.settings === null || text === "") {
      return;
    }
    this.question.value = "";
    this.work = this.performAsk(text, { ...this.settings });
  }

  private async performAsk(question: string, settings: Settings): Promise<void> {
    if (this.pending) {
      return;
    }
    this.pending = true;
    this.updateSubmitState();
    const indicator = make("li", "pending", "Waiting for the service...");
    indicator.dataset.role = "pending";
    this.history.append(indicator);

    let turn: ChatTurn;
    let retryable = false;
    try {
      const response = await this.client.ask({ question, ...settings });
      turn = {
        question,
        timestamp: this.now().toISOString(),
        response,
        error: null,
      };
    } catch (cause) {
      const message = cause instanceof Error ? cause.message : String(cause);
      retryable = cause instanceof ServiceError && cause.retryable;
      turn = {
        question,
        timestamp: this.now().toISOString(),
        response: null,
        error: message,
      };
    } finally {
      indicator.remove();
      this.pending = false;
      this.updateSubmitState();
    }
    this.log.push(turn);
    this.history.append(this.renderTurn(turn, retryable));
  }

  private renderTurn(turn: ChatTurn, retryable: boolean): HTMLElement {
    const item = make("li", "turn");
    item.append(make("div", "question", turn.question));
    const answer = make("div", "answer");
    item.append(answer);

    if (turn.response === null) {
      const error = make("div", "error", turn.error ?? "request failed");
      error.dataset.role = "turn-error";
      answer.append(error);
      if (retryable) {
        const retry = document.createElement("button");
        retry.type = "button";
        retry.textContent = "Retry";
        retry.dataset.role = "retry";
        retry.addEventListener("click", () => {
          if (this.settings !== null) {
            this.work = this.performAsk(turn.question, { ...this.settings });
          }
        });
        answer.append(retry);
      }
      return item;
    }

    const response = turn.response;
    const badge = make(
      "span",
      response.valid ? "badge valid" : "badge invalid",
      response.valid ? "valid" : "invalid",
    );
    badge.dataset.role = "badge";
    answer.append(badge);

    if (response.query !== null) {
      answer.append(this.renderQuery(response.query));
    } else {
      answer.append(make("div", "no-query", "The model produced no query."));
    }

    if (response.notes.length > 0) {
      const notes = make("ul", "notes");
      for (const note of response.notes) {
        notes.append(make("li", "note", note));
      }
      answer.append(notes);
    }

    if (response.results !== null) {
      answer.append(this.renderResults(response.results));
    }
    return item;
  }

  private renderQuery(query: string): HTMLElement {
    const wrapper = make("div", "query");
    const pre = document.createElement("pre");
    const code = document.createElement("code");
    code.dataset.role = "query";
    code.textContent = query;
    pre.append(code);
    const copy = document.createElement("button");
    copy.type = "button";
    copy.textContent = "Copy";
    copy.dataset.role = "copy";
    copy.addEventListener("click", () => {
      const clipboard = (navigator as Navigator & { clipboard?: Clipboard }).clipboard;
      if (clipboard !== undefined) {
        void clipboard.writeText(query);
      }
    });
    wrapper.append(pre, copy);
    return wrapper;
  }

  private renderResults(results: {
    count: number;
    ids: Array<number | string>;
    truncated: boolean;
    warning: string | null;
  }): HTMLElement {
    const wrapper = make("div", "results");
    wrapper.append(
      make(
        "div",
        "result-count",
        `${results.count} matching record${results.count === 1 ? "" : "s"}`,
      ),
    );
    if (results.warning !== null) {
      wrapper.append(make("div", "warning", results.warning));
    }
    if (results.ids.length > 0) {
      const table = document.createElement("table");
      table.dataset.role = "results";
      const head = document.createElement("thead");
      const headRow = document.createElement("tr");
      const header = document.createElement("th");
      header.textContent = "record id";
      headRow.append(header);
      head.append(headRow);
      const body = document.createElement("tbody");
      for (const id of results.ids) {
        const row = document.createElement("tr");
        const cell = document.createElement("td");
        cell.textContent = String(id);
        row.append(cell);
        body.append(row);
      }
      table.append(head, body);
      wrapper.append(table);
    }
    if (results.truncated) {
      const note = make(
        "div",
        "truncated",
        `Showing the first ${results.ids.length} of ${results.count} records (truncated).`,
      );
      note.dataset.role = "truncated";
      wrapper.append(note);
    }
    return wrapper;
  }
}

export function createApp(root: HTMLElement, options: AppOptions): App {
  return new WebchatApp(root, options);
}
