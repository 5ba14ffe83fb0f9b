/**
 * End-to-end UI test against a live template-gate service.
 *
 * Spawns the Python service on a free port, mounts the app in jsdom,
 * and walks the full loop: session -> voltage study -> plot -> seeded
 * failure -> Fix with AI -> feedback in the log view -> reconstruction
 * from the persisted session log.
 */

import { spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { PfAgentApp } from '../src/app';

const PORT = 8711 + Math.floor(Math.random() * 200);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;

async function waitForService(timeoutMs = 60_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/api/v1/config`);
      if (response.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
  throw new Error('service did not come up');
}

beforeAll(async () => {
  const root = mkdtempSync(join(tmpdir(), 'pfagent-ui-'));
  service = spawn('python3', [
    '-c',
    `from pfagent.service import main; main(host="127.0.0.1", port=${PORT}, root=${JSON.stringify(root)})`,
  ], { stdio: 'ignore' });
  await waitForService();
}, 90_000);

afterAll(() => {
  service?.kill();
});

function mount(): PfAgentApp {
  document.body.innerHTML = '<div id="app"></div>';
  return new PfAgentApp(document.getElementById('app')!, BASE);
}

describe('pfagent web ui', () => {
  it('runs a full study / failure / fix / feedback loop', async () => {
    const app = mount();
    await app.init();

    // template-gate mode needs no key
    expect(app.state.config?.mode).toBe('template-gate');

    const sessionId = await app.newSession();
    expect(sessionId).toBeTruthy();
    expect(document.querySelector('#session-id')?.textContent).toBe(sessionId);

    // 1. voltage study: result table + code block rendered
    const report = await app.sendMessage(
      'Run a power flow on ieee14 and report the bus voltages.');
    expect(report?.result.converged).toBe(true);
    const table = document.querySelector('.result-table');
    expect(table).not.toBeNull();
    expect(table!.textContent).toContain('min_voltage_pu');
    expect(String(table!.textContent)).toContain(String(report!.result.min_voltage_pu));
    expect(document.querySelector('.code-block code')?.textContent)
      .toContain('backend.get_case("ieee14")');

    // 2. plot turn: thumbnail wired to the plot endpoint
    const plotReport = await app.sendMessage('Plot the voltage profile.');
    expect(plotReport?.plot_files).toContain('voltage_profile.png');
    const img = document.querySelector<HTMLImageElement>('.plot-thumb img');
    expect(img).not.toBeNull();
    expect(img!.src).toContain(`/api/v1/sessions/${sessionId}/plots/voltage_profile.png`);
    const fetched = await fetch(img!.src);
    expect(fetched.status).toBe(200);
    expect(fetched.headers.get('content-type')).toBe('image/png');

    // 3. seeded failure via the config sidebar (mock provider mode)
    (document.querySelector('#cfg-mode') as HTMLSelectElement).value = 'mock:demo-failure';
    await app.applyConfigForm();
    expect(app.state.config?.mode).toBe('mock:demo-failure');

    const failing = await app.sendMessage(
      'Run it again with a demo failure, check the voltages');
    expect(failing?.fix_available).toBe(true);
    const errorView = document.querySelector('.error-view');
    expect(errorView).not.toBeNull();
    const fixBtn = document.querySelector<HTMLButtonElement>('.fix-btn');
    expect(fixBtn).not.toBeNull();
    expect(fixBtn!.textContent).toBe('Fix Error with AI');

    // 4. Fix with AI (service uses the scripted offline repairer)
    await app.runFix(failing!.turn_index);
    const note = document.querySelector('.fix-note');
    expect(note).not.toBeNull();
    expect(note!.textContent).toContain('Fixed in 1 iteration(s)');
    const logAfterFix = await app.api.getLog(sessionId);
    expect(logAfterFix.events.some((e) => e.event_kind === 'fix')).toBe(true);

    // 5. feedback lands in the log view
    await app.submitFeedback(failing!.turn_index, 'injected fault for the demo',
      'seeded failure');
    const logView = document.querySelector('#log-view');
    expect(logView!.textContent).toContain('feedback');
    expect(logView!.textContent).toContain('injected fault for the demo');

    // 6. the whole view state reconstructs from the persisted log
    app.state.messages = [];
    app.renderMessages();
    expect(document.querySelectorAll('.turn-card')).toHaveLength(0);
    await app.reloadFromLog();
    const cards = document.querySelectorAll('.turn-card');
    expect(cards.length).toBe(3);
    expect(document.querySelector('.code-block code')?.textContent)
      .toContain('backend.get_case("ieee14")');
  }, 120_000);

  it('blocks empty feedback client-side', async () => {
    const app = mount();
    await app.init();
    await app.newSession();
    await app.sendMessage('Run a power flow on pjm5 and report the bus voltages.');

    const issue = document.querySelector<HTMLTextAreaElement>('.feedback-issue')!;
    issue.value = '   ';
    document.querySelector<HTMLButtonElement>('.feedback-submit')!.click();
    expect(issue.classList.contains('invalid')).toBe(true);

    const log = await app.api.getLog(app.state.sessionId!);
    expect(log.events.some((e) => e.event_kind === 'feedback')).toBe(false);
  }, 60_000);

  it('mirrors the one-in-flight rule by disabling send', async () => {
    const app = mount();
    await app.init();
    await app.newSession();
    const pending = app.sendMessage('Run a power flow on kundur and report the bus voltages.');
    expect(app.state.pending).toBe(true);
    expect(document.querySelector<HTMLButtonElement>('#composer-send')!.disabled).toBe(true);
    await pending;
    expect(app.state.pending).toBe(false);
    expect(document.querySelector<HTMLButtonElement>('#composer-send')!.disabled).toBe(false);
  }, 60_000);
});
