// The interactive root-cause workflow, as one small state-driven app:
//
//   1. dataset upload + family queries        (#screen-dataset)
//   2. target and dual time-range selection   (#screen-target)
//   3. search space + conditioning set, with a pseudocause builder
//                                             (#screen-search)
//   4. ranked results with expandable diagnostic plots
//                                             (#screen-results)
//   5. fork: a child session pre-filled from the current one
//
// The app holds no analysis state of its own: every completed run is
// re-fetched from the API, so reloading a session reproduces the view.

import { ApiClient, ApiFailure, RunReport, SessionResource } from "./api.js";
import { seriesFromJsonl, validateRanges } from "./ranges.js";
import { renderSeriesPlot } from "./plot.js";

interface AppState {
  datasetId: string | null;
  datasetJsonl: string;
  tableId: string | null;
  families: string[];
  index: { start_ts: number; end_ts: number } | null;
  sessions: Map<string, SessionResource>;
  activeSession: string | null;
  report: RunReport | null;
  runInFlight: boolean;
  expandedFamily: string | null;
  error: string | null;
}

export class App {
  readonly state: AppState = {
    datasetId: null,
    datasetJsonl: "",
    tableId: null,
    families: [],
    index: null,
    sessions: new Map(),
    activeSession: null,
    report: null,
    runInFlight: false,
    expandedFamily: null,
    error: null,
  };

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
  ) {}

  private doc(): Document {
    return this.root.ownerDocument;
  }

  private byId<T extends HTMLElement>(id: string): T {
    const el = this.doc().getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el as T;
  }

  mount(): void {
    this.root.innerHTML = `
      <main class="causerank">
        <h1>causerank</h1>
        <p id="app-error" class="error" hidden></p>

        <section id="screen-dataset">
          <h2>1 · Dataset and families</h2>
          <textarea id="dataset-input" rows="6" placeholder="jsonl records"></textarea>
          <button id="dataset-upload">Upload dataset</button>
          <span id="dataset-status"></span>
          <textarea id="query-input" rows="3">FAMILY BY name SELECT avg(value)</textarea>
          <button id="query-run" disabled>Define families</button>
          <span id="query-status"></span>
        </section>

        <section id="screen-target" hidden>
          <h2>2 · Target and time ranges</h2>
          <label>Target family
            <select id="target-select"></select>
          </label>
          <div id="target-preview"></div>
          <fieldset>
            <label>Total range <input id="range-start" type="number"> .. <input id="range-end" type="number"></label>
            <label>Highlight <input id="highlight-start" type="number"> .. <input id="highlight-end" type="number"></label>
            <p id="range-error" class="error" hidden></p>
          </fieldset>
          <label>Method
            <select id="method-select">
              <option value="l2">L2</option>
              <option value="l2-p50">L2-P50</option>
              <option value="corrmax">CorrMax</option>
              <option value="corrmean">CorrMean</option>
            </select>
          </label>
          <label>Seed <input id="seed-input" type="number" value="0"></label>
          <button id="session-create" disabled>Create session</button>
        </section>

        <section id="screen-search" hidden>
          <h2>3 · Search space and conditioning</h2>
          <label>Filter families <input id="search-filter" placeholder="glob, e.g. disk*"></label>
          <ul id="family-list"></ul>
          <div class="conditioning">
            <h3>Conditioning set</h3>
            <ul id="condition-list"></ul>
            <fieldset id="pseudocause-builder">
              <legend>Pseudocause builder</legend>
              <select id="pc-kind">
                <option value="seasonal">seasonal</option>
                <option value="trend">trend</option>
              </select>
              <input id="pc-param" type="number" placeholder="period / window">
              <button id="pc-add" disabled>Condition on pseudocause</button>
              <span id="pc-status"></span>
            </fieldset>
          </div>
          <button id="run-button" disabled>Run ranking</button>
          <span id="run-status"></span>
        </section>

        <section id="screen-results" hidden>
          <h2>4 · Ranked candidate causes</h2>
          <table id="results-table">
            <thead><tr><th>#</th><th>family</th><th>score</th><th>p-value</th></tr></thead>
            <tbody></tbody>
          </table>
          <div id="plot-pane" hidden>
            <h3 id="plot-title"></h3>
            <div id="plot-container"></div>
          </div>
          <button id="fork-button" hidden>5 · Fork drill-down session</button>
        </section>

        <aside id="session-tree-pane">
          <h2>Sessions</h2>
          <ul id="session-tree"></ul>
        </aside>
      </main>`;
    this.wire();
  }

  private wire(): void {
    this.byId("dataset-upload").addEventListener("click", () => void this.uploadDataset());
    this.byId("query-run").addEventListener("click", () => void this.defineFamilies());
    this.byId("session-create").addEventListener("click", () => void this.createSession());
    ["range-start", "range-end", "highlight-start", "highlight-end"].forEach((id) =>
      this.byId(id).addEventListener("input", () => this.validateRangeInputs()),
    );
    this.byId("target-select").addEventListener("change", () => this.renderTargetPreview());
    this.byId("search-filter").addEventListener("input", () => this.renderFamilyList());
    this.byId("pc-add").addEventListener("click", () => void this.addPseudocause());
    this.byId("run-button").addEventListener("click", () => void this.runRanking());
    this.byId("fork-button").addEventListener("click", () => void this.forkSession());
  }

  private showError(err: unknown): void {
    const box = this.byId<HTMLParagraphElement>("app-error");
    if (err === null) {
      box.hidden = true;
      box.textContent = "";
      this.state.error = null;
      return;
    }
    const message = err instanceof ApiFailure ? `${err.code}: ${err.message}` : String(err);
    this.state.error = message;
    box.textContent = message;
    box.hidden = false;
  }

  // -- screen 1 -------------------------------------------------------------

  async uploadDataset(): Promise<void> {
    this.showError(null);
    try {
      const jsonl = this.byId<HTMLTextAreaElement>("dataset-input").value;
      const res = await this.api.uploadDataset(jsonl);
      this.state.datasetId = res.id;
      this.state.datasetJsonl = jsonl;
      this.byId("dataset-status").textContent = `dataset ${res.id} (${res.records} records)`;
      this.byId<HTMLButtonElement>("query-run").disabled = false;
    } catch (err) {
      this.showError(err);
    }
  }

  async defineFamilies(): Promise<void> {
    this.showError(null);
    if (!this.state.datasetId) return;
    try {
      const text = this.byId<HTMLTextAreaElement>("query-input").value;
      const res = await this.api.runQueries(this.state.datasetId, text);
      this.state.tableId = res.table;
      this.state.families = res.families;
      this.state.index = res.index;
      this.byId("query-status").textContent = `${res.families.length} families / ${res.features} features`;
      const select = this.byId<HTMLSelectElement>("target-select");
      select.innerHTML = res.families
        .map((f) => `<option value="${f}">${f}</option>`)
        .join("");
      this.byId<HTMLInputElement>("range-start").value = String(res.index.start_ts);
      this.byId<HTMLInputElement>("range-end").value = String(res.index.end_ts);
      this.byId<HTMLElement>("screen-target").hidden = false;
      this.byId<HTMLButtonElement>("session-create").disabled = false;
      this.renderTargetPreview();
    } catch (err) {
      this.showError(err);
    }
  }

  // -- screen 2 -------------------------------------------------------------

  renderTargetPreview(): void {
    const target = this.byId<HTMLSelectElement>("target-select").value;
    const container = this.byId("target-preview");
    container.innerHTML = "";
    if (!target || !this.state.datasetJsonl) return;
    const series = seriesFromJsonl(this.state.datasetJsonl, target);
    if (series.length === 0) return;
    const highlight = this.highlightFraction();
    container.appendChild(
      renderSeriesPlot(this.doc(), [{ name: "target", values: series }], { highlight }),
    );
  }

  private readRange(startId: string, endId: string): { start: number; end: number } | null {
    const start = this.byId<HTMLInputElement>(startId).value;
    const end = this.byId<HTMLInputElement>(endId).value;
    if (start === "" && end === "") return null;
    return { start: Number(start), end: Number(end) };
  }

  private highlightFraction(): [number, number] | null {
    const total = this.readRange("range-start", "range-end");
    const hl = this.readRange("highlight-start", "highlight-end");
    if (!total || !hl) return null;
    const span = total.end - total.start;
    if (span <= 0) return null;
    return [(hl.start - total.start) / span, (hl.end - total.start) / span];
  }

  validateRangeInputs(): string | null {
    const total = this.readRange("range-start", "range-end") ?? { start: NaN, end: NaN };
    const highlight = this.readRange("highlight-start", "highlight-end");
    const problem = validateRanges(total, highlight);
    const box = this.byId<HTMLParagraphElement>("range-error");
    box.hidden = problem === null;
    box.textContent = problem ?? "";
    this.byId<HTMLButtonElement>("session-create").disabled =
      problem !== null || this.state.tableId === null;
    if (problem === null) this.renderTargetPreview();
    return problem;
  }

  async createSession(): Promise<void> {
    this.showError(null);
    if (!this.state.tableId) return;
    const problem = this.validateRangeInputs();
    if (problem) return;
    const total = this.readRange("range-start", "range-end")!;
    const highlight = this.readRange("highlight-start", "highlight-end");
    try {
      const res = await this.api.createSession({
        table: this.state.tableId,
        target: this.byId<HTMLSelectElement>("target-select").value,
        method: this.byId<HTMLSelectElement>("method-select").value,
        seed: Number(this.byId<HTMLInputElement>("seed-input").value || "0"),
        range: [total.start, total.end],
        ...(highlight ? { highlight: [highlight.start, highlight.end] as [number, number] } : {}),
      });
      this.adoptSession(res.session);
    } catch (err) {
      this.showError(err);
    }
  }

  private adoptSession(session: SessionResource): void {
    this.state.sessions.set(session.id, session);
    this.state.activeSession = session.id;
    this.state.report = null;
    this.state.expandedFamily = null;
    this.byId<HTMLElement>("screen-search").hidden = false;
    this.byId<HTMLButtonElement>("run-button").disabled = false;
    this.byId<HTMLButtonElement>("pc-add").disabled = false;
    this.byId<HTMLElement>("screen-results").hidden = true;
    this.byId("run-status").textContent = "";
    this.renderFamilyList();
    this.renderConditionList();
    this.renderSessionTree();
  }

  // -- screen 3 -------------------------------------------------------------

  private activeSessionResource(): SessionResource | null {
    return this.state.activeSession
      ? (this.state.sessions.get(this.state.activeSession) ?? null)
      : null;
  }

  renderFamilyList(): void {
    const pattern = this.byId<HTMLInputElement>("search-filter").value.trim();
    const regex = pattern
      ? new RegExp(`^${pattern.replace(/[.+^${}()|[\]\\]/g, "\\$&").replace(/\*/g, ".*").replace(/\?/g, ".")}$`)
      : null;
    const session = this.activeSessionResource();
    const target = session?.target;
    const list = this.byId("family-list");
    list.innerHTML = "";
    for (const fam of this.state.families) {
      if (fam === target) continue;
      if (regex && !regex.test(fam)) continue;
      const li = this.doc().createElement("li");
      li.className = "family-item";
      li.dataset.family = fam;
      li.textContent = fam;
      list.appendChild(li);
    }
  }

  renderConditionList(): void {
    const session = this.activeSessionResource();
    const list = this.byId("condition-list");
    list.innerHTML = "";
    for (const key of session?.condition ?? []) {
      const li = this.doc().createElement("li");
      li.className = "condition-item";
      li.dataset.family = key;
      li.textContent = key;
      list.appendChild(li);
    }
  }

  async addPseudocause(): Promise<void> {
    this.showError(null);
    const session = this.activeSessionResource();
    if (!session) return;
    const kind = this.byId<HTMLSelectElement>("pc-kind").value as "seasonal" | "trend";
    const value = Number(this.byId<HTMLInputElement>("pc-param").value);
    const params = kind === "seasonal" ? { period: value } : { window: value };
    try {
      const res = await this.api.addPseudocause(session.id, kind, params);
      const fresh = await this.api.getSession(session.id);
      this.state.sessions.set(session.id, fresh.session);
      this.byId("pc-status").textContent = `conditioning on ${res.key}`;
      this.renderConditionList();
    } catch (err) {
      this.showError(err);
    }
  }

  async runRanking(): Promise<void> {
    this.showError(null);
    const session = this.activeSessionResource();
    if (!session || this.state.runInFlight) return;
    this.state.runInFlight = true;
    const status = this.byId("run-status");
    const button = this.byId<HTMLButtonElement>("run-button");
    button.disabled = true;
    status.textContent = "running...";
    try {
      const started = await this.api.startRun(session.id);
      const report = await this.api.pollRun(session.id, started.run);
      const fresh = await this.api.getSession(session.id);
      this.state.sessions.set(session.id, fresh.session);
      status.textContent = `run ${started.run} done`;
      this.showReport(report);
    } catch (err) {
      status.textContent = "run failed";
      this.showError(err);
    } finally {
      this.state.runInFlight = false;
      button.disabled = false;
    }
  }

  // -- screen 4 -------------------------------------------------------------

  showReport(report: RunReport): void {
    this.state.report = report;
    this.byId<HTMLElement>("screen-results").hidden = false;
    this.byId<HTMLElement>("fork-button").hidden = false;
    const tbody = this.byId("results-table").querySelector("tbody")!;
    tbody.innerHTML = "";
    report.entries.forEach((entry, i) => {
      const tr = this.doc().createElement("tr");
      tr.className = "result-row";
      tr.dataset.family = entry.family;
      tr.innerHTML = `
        <td>${i + 1}</td>
        <td class="cell-family">${entry.family}</td>
        <td class="cell-score">${entry.score.toFixed(3)}</td>
        <td class="cell-pvalue">${entry.p_value.toExponential(2)}</td>`;
      tr.addEventListener("click", () => void this.togglePlot(entry.family));
      tbody.appendChild(tr);
    });
    this.renderSessionTree();
  }

  async togglePlot(family: string): Promise<void> {
    this.showError(null);
    const session = this.activeSessionResource();
    if (!session) return;
    const pane = this.byId<HTMLElement>("plot-pane");
    if (this.state.expandedFamily === family && !pane.hidden) {
      pane.hidden = true;
      this.state.expandedFamily = null;
      return;
    }
    try {
      const res = await this.api.getPlot(session.id, family);
      this.state.expandedFamily = family;
      this.byId("plot-title").textContent = `${family}: observed target|Z vs predicted`;
      const container = this.byId("plot-container");
      container.innerHTML = "";
      container.appendChild(
        renderSeriesPlot(this.doc(), [
          { name: "observed", values: res.plot.observed },
          { name: "predicted", values: res.plot.predicted },
        ]),
      );
      pane.hidden = false;
    } catch (err) {
      this.showError(err);
    }
  }

  // -- screen 5 -------------------------------------------------------------

  async forkSession(): Promise<void> {
    this.showError(null);
    const session = this.activeSessionResource();
    if (!session) return;
    try {
      const res = await this.api.fork(session.id, {});
      this.adoptSession(res.session);
      this.byId("run-status").textContent = `forked from ${session.id}`;
    } catch (err) {
      this.showError(err);
    }
  }

  async loadSession(id: string): Promise<void> {
    this.showError(null);
    try {
      const res = await this.api.getSession(id);
      this.adoptSession(res.session);
      if (res.session.runs > 0) {
        const report = await this.api.pollRun(id, res.session.runs - 1);
        this.showReport(report);
      }
    } catch (err) {
      this.showError(err);
    }
  }

  renderSessionTree(): void {
    const byParent = new Map<string | null, SessionResource[]>();
    for (const s of this.state.sessions.values()) {
      const list = byParent.get(s.parent) ?? [];
      list.push(s);
      byParent.set(s.parent, list);
    }
    const renderLevel = (parent: string | null): HTMLUListElement => {
      const ul = this.doc().createElement("ul");
      for (const s of byParent.get(parent) ?? []) {
        const li = this.doc().createElement("li");
        li.dataset.session = s.id;
        li.className = s.id === this.state.activeSession ? "session active" : "session";
        li.textContent = `${s.id} (${s.method}, runs ${s.runs})`;
        li.addEventListener("click", (ev) => {
          ev.stopPropagation();
          void this.loadSession(s.id);
        });
        if (byParent.has(s.id)) li.appendChild(renderLevel(s.id));
        ul.appendChild(li);
      }
      return ul;
    };
    const pane = this.byId("session-tree");
    pane.innerHTML = "";
    // roots: sessions whose parent is unknown to this client
    for (const [parent, list] of byParent) {
      if (parent === null || !this.state.sessions.has(parent)) {
        for (const s of list) {
          const ul = renderLevel(s.parent);
          pane.append(...Array.from(ul.children));
        }
      }
    }
  }
}

export function mountApp(root: HTMLElement, baseUrl: string): App {
  const app = new App(root, new ApiClient(baseUrl));
  app.mount();
  return app;
}
