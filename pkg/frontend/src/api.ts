// Typed client for the annotation service JSON API.

export interface Statement {
  key: string;
  text: string;
}

export interface Scale {
  min: number;
  max: number;
  labels: Record<string, string>;
}

export interface StatementsPayload {
  statements: Statement[];
  scale: Scale;
}

export type Answers = Record<string, number>;

export interface ItemView {
  item_id: string;
  essay_prompt: string;
  essay: string;
  feedback: string;
  answers: Answers | null;
}

export interface Progress {
  completed: number;
  total: number;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!response.ok) {
      throw new ApiError(`GET ${path} failed: ${response.status}`, response.status);
    }
    return response.json() as Promise<T>;
  }

  statements(): Promise<StatementsPayload> {
    return this.get("/api/statements");
  }

  items(annotatorId: string): Promise<{ items: ItemView[] }> {
    return this.get(`/api/annotators/${encodeURIComponent(annotatorId)}/items`);
  }

  progress(annotatorId: string): Promise<Progress> {
    return this.get(`/api/annotators/${encodeURIComponent(annotatorId)}/progress`);
  }

  async submit(annotatorId: string, itemId: string, answers: Answers): Promise<void> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/annotators/${encodeURIComponent(annotatorId)}/annotations`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ item_id: itemId, ...answers }),
      },
    );
    if (!response.ok) {
      throw new ApiError(`submission rejected: ${response.status}`, response.status);
    }
  }
}
