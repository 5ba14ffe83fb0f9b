/** Typed client for the pfagent service under /api/v1/. */

export interface TurnReport {
  summary: string;
  result: Record<string, unknown>;
  plot_files: string[];
  code: string;
  log_excerpt: string;
  fix_history: string[];
  fix_available: boolean;
  turn_index: number;
  response_text: string;
}

export interface SessionHandle {
  session_id: string;
  created_at: string;
  mode: string;
  workspace: string;
}

export interface FixOutcome {
  final: 'Fixed' | 'BestEffort';
  iterations_used: number;
  validated_locally: boolean;
  attempts: { iteration: number; succeeded: boolean; repaired_code: string }[];
}

export interface LogEvent {
  timestamp: number;
  seq: number;
  event_kind: string;
  payload: Record<string, any>;
}

export interface SessionLog {
  session_id: string;
  created_at: string;
  events: LogEvent[];
}

export interface AgentConfig {
  mode: string;
  static_checks_enabled: boolean;
  validate_fix_locally: boolean;
  fix_retry_limit: number;
  max_attempts: number;
  api_key_set?: boolean;
}

export interface EvolutionProfile {
  version: number;
  active_packs: string[];
  guidance: string[];
  root_cause_summary: Record<string, { count: number; examples: string[] }>;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class PfAgentApi {
  constructor(private baseUrl = '') {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}/api/v1${path}`, {
      method,
      headers: body === undefined ? undefined : { 'Content-Type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const parsed = await response.json();
        detail = typeof parsed.detail === 'string' ? parsed.detail : JSON.stringify(parsed.detail);
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return response.json() as Promise<T>;
  }

  createSession(mode?: string): Promise<SessionHandle> {
    return this.request('POST', '/sessions', mode ? { mode } : {});
  }

  sendMessage(sessionId: string, text: string, files?: Record<string, string>): Promise<TurnReport> {
    return this.request('POST', `/sessions/${sessionId}/messages`, { text, files });
  }

  fix(sessionId: string, turn?: number): Promise<FixOutcome> {
    return this.request('POST', `/sessions/${sessionId}/fix`, turn === undefined ? {} : { turn });
  }

  feedback(sessionId: string, turn: number, issueText: string, rootCause?: string): Promise<{ recorded: boolean }> {
    return this.request('POST', `/sessions/${sessionId}/feedback`, {
      turn,
      issue_text: issueText,
      root_cause: rootCause ?? null,
    });
  }

  getLog(sessionId: string): Promise<SessionLog> {
    return this.request('GET', `/sessions/${sessionId}/log`);
  }

  getConfig(): Promise<AgentConfig> {
    return this.request('GET', '/config');
  }

  putConfig(partial: Partial<AgentConfig> & { api_key?: string }): Promise<AgentConfig> {
    return this.request('PUT', '/config', partial);
  }

  getProfile(): Promise<EvolutionProfile> {
    return this.request('GET', '/evolution/profile');
  }

  plotUrl(sessionId: string, name: string): string {
    return `${this.baseUrl}/api/v1/sessions/${sessionId}/plots/${name}`;
  }
}
