/** DOM rendering helpers. Numerical values are printed verbatim from
 *  TurnReport.result; nothing is recomputed client-side. */

import type { LogEvent, TurnReport } from './api';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderCodeBlock(code: string): HTMLElement {
  const wrap = el('div', 'code-block');
  const bar = el('div', 'code-bar');
  bar.appendChild(el('span', 'code-lang', 'python'));
  const copy = el('button', 'copy-btn', 'copy');
  copy.addEventListener('click', () => {
    if (navigator.clipboard) void navigator.clipboard.writeText(code);
  });
  bar.appendChild(copy);
  wrap.appendChild(bar);
  const pre = el('pre');
  const codeEl = el('code', undefined, code);
  pre.appendChild(codeEl);
  wrap.appendChild(pre);
  return wrap;
}

export function renderResultTable(result: Record<string, unknown>): HTMLElement {
  const table = el('table', 'result-table');
  const head = table.createTHead().insertRow();
  head.appendChild(el('th', undefined, 'key'));
  head.appendChild(el('th', undefined, 'value'));
  const body = table.createTBody();
  for (const [key, value] of Object.entries(result)) {
    const row = body.insertRow();
    row.insertCell().textContent = key;
    row.insertCell().textContent = String(value);
  }
  return table;
}

export function renderPlots(
  plotFiles: string[], urlFor: (name: string) => string,
): HTMLElement {
  const strip = el('div', 'plot-strip');
  for (const name of plotFiles) {
    const fig = el('figure', 'plot-thumb');
    const img = el('img');
    img.src = urlFor(name);
    img.alt = name;
    fig.appendChild(img);
    fig.appendChild(el('figcaption', undefined, name));
    strip.appendChild(fig);
  }
  return strip;
}

export interface TurnActions {
  onFix?: (turn: number) => void;
  onFeedback?: (turn: number, issueText: string, rootCause: string) => void;
}

export function renderTurn(
  userText: string, report: TurnReport,
  urlFor: (name: string) => string, actions: TurnActions,
): HTMLElement {
  const card = el('section', 'turn-card');
  card.dataset.turn = String(report.turn_index);

  const user = el('div', 'msg user');
  user.appendChild(el('div', 'msg-role', 'you'));
  user.appendChild(el('div', 'msg-text', userText));
  card.appendChild(user);

  const agent = el('div', 'msg agent');
  agent.appendChild(el('div', 'msg-role', 'pfagent'));
  agent.appendChild(el('div', 'msg-text summary', report.summary));

  if (report.code) agent.appendChild(renderCodeBlock(report.code));

  if (report.fix_available) {
    const error = el('div', 'error-view');
    error.appendChild(el('div', 'error-title', 'execution failed'));
    if (report.log_excerpt) {
      const excerpt = el('pre', 'log-excerpt', report.log_excerpt);
      error.appendChild(excerpt);
    }
    const fixBtn = el('button', 'fix-btn', 'Fix Error with AI');
    fixBtn.addEventListener('click', () => actions.onFix?.(report.turn_index));
    error.appendChild(fixBtn);
    agent.appendChild(error);
  } else {
    if (Object.keys(report.result).length > 0) {
      agent.appendChild(renderResultTable(report.result));
    }
    if (report.plot_files.length > 0) {
      agent.appendChild(renderPlots(report.plot_files, urlFor));
    }
  }

  if (report.fix_history.length > 0) {
    agent.appendChild(el('div', 'fix-note', `repairs: ${report.fix_history.join(', ')}`));
  }

  const feedback = el('details', 'feedback-form');
  feedback.appendChild(el('summary', undefined, 'flag an issue'));
  const issue = el('textarea', 'feedback-issue');
  issue.placeholder = 'what went wrong?';
  const rootCause = el('input', 'feedback-root-cause');
  rootCause.placeholder = 'root cause (optional)';
  const submit = el('button', 'feedback-submit', 'submit feedback');
  submit.addEventListener('click', () => {
    if (!issue.value.trim()) {
      issue.classList.add('invalid');
      return;
    }
    issue.classList.remove('invalid');
    actions.onFeedback?.(report.turn_index, issue.value.trim(), rootCause.value.trim());
  });
  feedback.appendChild(issue);
  feedback.appendChild(rootCause);
  feedback.appendChild(submit);
  agent.appendChild(feedback);

  card.appendChild(agent);
  return card;
}

export function renderLogView(events: LogEvent[]): HTMLElement {
  const list = el('ul', 'log-list');
  for (const event of events) {
    const item = el('li', `log-item kind-${event.event_kind}`);
    item.appendChild(el('span', 'log-kind', event.event_kind));
    const bits: string[] = [];
    if (event.payload.turn_index !== undefined) bits.push(`turn ${event.payload.turn_index}`);
    if (event.event_kind === 'feedback') bits.push(String(event.payload.issue_text ?? ''));
    if (event.event_kind === 'fix') bits.push(String(event.payload.note ?? ''));
    if (event.event_kind === 'execution') {
      bits.push(event.payload.exit_status === 0 ? 'ok' : `failed (${event.payload.error_class})`);
    }
    item.appendChild(el('span', 'log-detail', bits.join(' - ')));
    list.appendChild(item);
  }
  return list;
}

export function renderProfilePanel(
  profile: { version: number; root_cause_summary: Record<string, { count: number }> },
): HTMLElement {
  const panel = el('div', 'profile-panel');
  panel.appendChild(el('div', 'profile-version', `profile v${profile.version}`));
  const list = el('ul', 'root-cause-list');
  for (const [signature, entry] of Object.entries(profile.root_cause_summary)) {
    list.appendChild(el('li', 'root-cause-item', `${signature}: ${entry.count}`));
  }
  panel.appendChild(list);
  return panel;
}
