/** Application shell: config sidebar, chat panel, log view, root causes.
 *
 * One in-flight request per session, mirroring the service's 409 rule:
 * the send button stays disabled while a turn or fix is pending. Turn
 * and fix progress refresh by polling (1 s default); the UI can always
 * be reconstructed from GET /sessions/{id}/log.
 */

import { ApiError, PfAgentApi } from './api';
import type { AgentConfig, SessionLog, TurnReport } from './api';
import { renderLogView, renderProfilePanel, renderTurn } from './views';

export interface MessageEntry {
  userText: string;
  report: TurnReport;
}

export interface ViewState {
  sessionId: string | null;
  messages: MessageEntry[];
  config: AgentConfig | null;
  pending: boolean;
  pendingFix: boolean;
}

const MODES = [
  'template-gate', 'mock:gate-mimic', 'mock:demo-failure',
  'mock:drop-ledger-turn3', 'mock:outage-api-misuse',
  'base', 'fine-tuned', 'rag-base', 'fine-tuned-rag',
];

export class PfAgentApp {
  readonly api: PfAgentApi;
  readonly state: ViewState = {
    sessionId: null, messages: [], config: null, pending: false, pendingFix: false,
  };
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(private root: HTMLElement, baseUrl = '', private pollMs = 1000) {
    this.api = new PfAgentApi(baseUrl);
  }

  async init(): Promise<void> {
    this.root.innerHTML = `
      <div class="layout">
        <aside id="sidebar">
          <h2>configuration</h2>
          <form id="config-form">
            <label>mode
              <select id="cfg-mode">${MODES.map((m) => `<option>${m}</option>`).join('')}</select>
            </label>
            <label><input type="checkbox" id="cfg-static"> static checks</label>
            <label><input type="checkbox" id="cfg-validate-fix"> validate fixes locally</label>
            <label>fix retry limit <input type="number" id="cfg-fix-limit" min="1" max="9"></label>
            <label>API key <input type="password" id="cfg-key" placeholder="unchanged"></label>
            <button type="submit" id="cfg-apply">apply</button>
          </form>
          <div id="upload-box">
            <h2>case upload</h2>
            <input type="text" id="upload-name" placeholder="my_case.json">
            <textarea id="upload-content" placeholder="case JSON"></textarea>
            <button id="upload-send">attach to next message</button>
          </div>
          <div id="session-box">
            <h2>session</h2>
            <button id="new-session">new session</button>
            <button id="reload-session">rebuild from log</button>
            <div id="session-id" class="mono"></div>
          </div>
          <div id="profile-box">
            <h2>root causes</h2>
            <div id="profile-view"></div>
          </div>
        </aside>
        <main id="chat">
          <div id="messages"></div>
          <div id="status-bar" class="hidden"></div>
          <form id="composer">
            <textarea id="composer-text" placeholder="describe a power-flow study..."></textarea>
            <button type="submit" id="composer-send">send</button>
          </form>
        </main>
        <aside id="log-panel">
          <h2>session log</h2>
          <div id="log-view"></div>
        </aside>
      </div>`;

    this.byId<HTMLFormElement>('config-form').addEventListener('submit', (event) => {
      event.preventDefault();
      void this.applyConfigForm();
    });
    this.byId<HTMLButtonElement>('new-session').addEventListener('click', () => {
      void this.newSession();
    });
    this.byId<HTMLButtonElement>('reload-session').addEventListener('click', () => {
      void this.reloadFromLog();
    });
    this.byId<HTMLFormElement>('composer').addEventListener('submit', (event) => {
      event.preventDefault();
      const box = this.byId<HTMLTextAreaElement>('composer-text');
      const text = box.value.trim();
      if (text) {
        box.value = '';
        void this.sendMessage(text);
      }
    });

    await this.refreshConfig();
    await this.refreshProfile();
  }

  private byId<T extends HTMLElement>(id: string): T {
    const node = this.root.querySelector(`#${id}`);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
  }

  private setStatus(text: string | null): void {
    const bar = this.byId<HTMLDivElement>('status-bar');
    if (text === null) {
      bar.classList.add('hidden');
      bar.textContent = '';
    } else {
      bar.classList.remove('hidden');
      bar.textContent = text;
    }
  }

  private setPending(pending: boolean): void {
    this.state.pending = pending;
    this.byId<HTMLButtonElement>('composer-send').disabled = pending;
  }

  // -- config ---------------------------------------------------------------

  async refreshConfig(): Promise<void> {
    this.state.config = await this.api.getConfig();
    const cfg = this.state.config;
    this.byId<HTMLSelectElement>('cfg-mode').value = cfg.mode;
    this.byId<HTMLInputElement>('cfg-static').checked = cfg.static_checks_enabled;
    this.byId<HTMLInputElement>('cfg-validate-fix').checked = cfg.validate_fix_locally;
    this.byId<HTMLInputElement>('cfg-fix-limit').value = String(cfg.fix_retry_limit);
  }

  async applyConfigForm(): Promise<void> {
    const key = this.byId<HTMLInputElement>('cfg-key').value;
    try {
      await this.api.putConfig({
        mode: this.byId<HTMLSelectElement>('cfg-mode').value,
        static_checks_enabled: this.byId<HTMLInputElement>('cfg-static').checked,
        validate_fix_locally: this.byId<HTMLInputElement>('cfg-validate-fix').checked,
        fix_retry_limit: Number(this.byId<HTMLInputElement>('cfg-fix-limit').value) || 3,
        ...(key ? { api_key: key } : {}),
      });
      this.byId<HTMLInputElement>('cfg-key').value = '';
      await this.refreshConfig();
      this.setStatus(null);
    } catch (err) {
      this.setStatus(`config error: ${(err as Error).message}`);
    }
  }

  // -- session and turns ------------------------------------------------------

  async newSession(): Promise<string> {
    const handle = await this.api.createSession();
    this.state.sessionId = handle.session_id;
    this.state.messages = [];
    this.byId<HTMLDivElement>('session-id').textContent = handle.session_id;
    this.renderMessages();
    await this.refreshLog();
    return handle.session_id;
  }

  private pendingUpload: Record<string, string> | undefined;

  attachUpload(name: string, content: string): void {
    this.pendingUpload = { [name]: content };
  }

  async sendMessage(text: string): Promise<TurnReport | null> {
    if (!this.state.sessionId) await this.newSession();
    if (this.state.pending) return null;  // mirror of the service 409 rule
    this.setPending(true);
    this.setStatus('turn in progress...');
    try {
      const report = await this.api.sendMessage(
        this.state.sessionId!, text, this.pendingUpload);
      this.pendingUpload = undefined;
      this.state.messages.push({ userText: text, report });
      this.renderMessages();
      await this.refreshLog();
      this.setStatus(null);
      return report;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.setStatus('turn in progress');
      } else {
        this.setStatus(`error: ${(err as Error).message}`);
      }
      return null;
    } finally {
      this.setPending(false);
    }
  }

  async runFix(turn: number): Promise<void> {
    if (!this.state.sessionId || this.state.pendingFix) return;
    this.state.pendingFix = true;
    this.setStatus(`repairing turn ${turn}...`);
    try {
      const outcome = await this.api.fix(this.state.sessionId, turn);
      const entry = this.state.messages.find((m) => m.report.turn_index === turn);
      if (entry) {
        entry.report.fix_history.push(
          `${outcome.final} in ${outcome.iterations_used} iteration(s), ` +
          `validation ${outcome.validated_locally && outcome.final === 'Fixed' ? 'passed' : 'pending'}`);
      }
      this.renderMessages();
      await this.refreshLog();
      this.setStatus(null);
    } catch (err) {
      this.setStatus(`fix error: ${(err as Error).message}`);
    } finally {
      this.state.pendingFix = false;
    }
  }

  async submitFeedback(turn: number, issueText: string, rootCause: string): Promise<void> {
    if (!this.state.sessionId) return;
    await this.api.feedback(this.state.sessionId, turn, issueText, rootCause || undefined);
    await this.refreshLog();
    await this.refreshProfile();
    this.setStatus('feedback recorded');
  }

  // -- secondary panels ----------------------------------------------------------

  async refreshLog(): Promise<SessionLog | null> {
    if (!this.state.sessionId) return null;
    const log = await this.api.getLog(this.state.sessionId);
    const view = this.byId<HTMLDivElement>('log-view');
    view.innerHTML = '';
    view.appendChild(renderLogView(log.events));
    return log;
  }

  async refreshProfile(): Promise<void> {
    try {
      const profile = await this.api.getProfile();
      const view = this.byId<HTMLDivElement>('profile-view');
      view.innerHTML = '';
      view.appendChild(renderProfilePanel(profile));
    } catch {
      /* profile endpoint unavailable: leave the panel empty */
    }
  }

  /** Rebuild the message list purely from the persisted session log. */
  async reloadFromLog(): Promise<void> {
    const log = await this.refreshLog();
    if (!log) return;
    const byTurn = new Map<number, MessageEntry>();
    for (const event of log.events) {
      const turn = event.payload.turn_index as number | undefined;
      if (turn === undefined) continue;
      if (event.event_kind === 'turn') {
        byTurn.set(turn, {
          userText: String(event.payload.text ?? ''),
          report: {
            summary: String(event.payload.error ?? ''), result: {}, plot_files: [],
            code: '', log_excerpt: '', fix_history: [], fix_available: false,
            turn_index: turn, response_text: '',
          },
        });
      }
      const entry = byTurn.get(turn);
      if (!entry) continue;
      if (event.event_kind === 'generation') {
        entry.report.code = String(event.payload.code ?? '');
      }
      if (event.event_kind === 'execution' && !event.payload.rerun) {
        const ok = event.payload.exit_status === 0;
        entry.report.result = (event.payload.result as Record<string, unknown>) ?? {};
        entry.report.plot_files = (event.payload.plot_files as string[]) ?? [];
        entry.report.fix_available = !ok;
        entry.report.summary = ok
          ? 'reconstructed from session log'
          : `Execution failed: ${event.payload.error_class}.`;
      }
      if (event.event_kind === 'fix') {
        entry.report.fix_history.push(String(event.payload.note ?? ''));
      }
    }
    this.state.messages = [...byTurn.values()].sort(
      (a, b) => a.report.turn_index - b.report.turn_index);
    this.renderMessages();
  }

  renderMessages(): void {
    const container = this.byId<HTMLDivElement>('messages');
    container.innerHTML = '';
    for (const entry of this.state.messages) {
      container.appendChild(renderTurn(
        entry.userText, entry.report,
        (name) => this.api.plotUrl(this.state.sessionId ?? '', name),
        {
          onFix: (turn) => void this.runFix(turn),
          onFeedback: (turn, issue, cause) => void this.submitFeedback(turn, issue, cause),
        },
      ));
    }
  }

  startPolling(): void {
    if (this.pollTimer) return;
    this.pollTimer = setInterval(() => {
      if (this.state.pending || this.state.pendingFix) void this.refreshLog();
      void this.refreshProfile();
    }, this.pollMs);
  }

  stopPolling(): void {
    if (this.pollTimer) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }
}
